"""Minibatch proximal iteration: schedules, steps, and the run driver.

One outer iteration solves

    w_t = argmin_{w in domain}  phi_I(w) + (gamma_t/2) ||w - w_{t-1}||^2

either exactly or to a per-iteration tolerance eta_t.  Two gamma schedules
are supported: a constant sqrt(8T/b)*L/D0 for merely-convex losses with
uniform averaging, and the ramp gamma_t = lam*(t-1)/2 for lam-strongly convex
losses with t-weighted averaging.  The ramp's first step has gamma_1 = 0 and
minimizes the batch objective alone, which the ridge makes well posed.

Every exact step is certified in place against the fixed-point identity
w_t = P(w_{t-1} - grad phi_I(w_t)/gamma_t): the gradient is evaluated at the
*new* point, which is the whole difference between this update and a plain
projected gradient step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import draw_minibatch
from .losses import (
    Domain,
    LossModel,
    Minibatch,
    batch_grad,
    batch_value,
    ls_erm_solve,
    project,
    prox_fixed_point_residual,
    prox_objective,
    prox_solve,
)
from .metrics import RunReport, inner_gap_oracle

WEAKLY_CONVEX = "weakly_convex_const"
STRONGLY_CONVEX = "strongly_convex_ramp"

# Auxiliary randomness (reference points for descent checks) lives on its own
# stream so it can never perturb the sample draws.
_AUX_STREAM = 986960441


@dataclass(frozen=True)
class ProxSchedule:
    """Regularization and inner-tolerance schedule for a T-iteration run."""

    mode: str
    T: int
    b: int
    L: float
    D0: float = 1.0
    gamma_const: float = 0.0
    lam: float = 0.0
    c1: float = 1e-4
    c2: float = 1e-4
    delta: float = 0.5

    def __post_init__(self):
        if self.mode not in (WEAKLY_CONVEX, STRONGLY_CONVEX):
            raise ValueError("unknown schedule mode %r" % (self.mode,))
        if self.T < 1 or self.b < 1:
            raise ValueError("T and b must be at least 1")
        if self.L <= 0 or self.D0 <= 0:
            raise ValueError("L and D0 must be positive")
        if self.mode == WEAKLY_CONVEX and self.gamma_const <= 0:
            raise ValueError("constant schedule needs gamma_const > 0")
        if self.mode == STRONGLY_CONVEX and self.lam <= 0:
            raise ValueError("ramp schedule needs lam > 0")
        if self.c1 <= 0 or self.c2 <= 0 or self.delta <= 0:
            raise ValueError("c1, c2, delta must be positive")


def weakly_convex_schedule(T, b, L, D0, c1=1e-4, c2=1e-4, delta=0.5) -> ProxSchedule:
    gamma = math.sqrt(8.0 * T / b) * L / D0
    return ProxSchedule(WEAKLY_CONVEX, T, b, L, D0, gamma_const=gamma, c1=c1, c2=c2, delta=delta)


def strongly_convex_schedule(T, b, L, lam, D0=1.0, c1=1e-4, c2=1e-4, delta=0.5) -> ProxSchedule:
    return ProxSchedule(STRONGLY_CONVEX, T, b, L, D0, lam=lam, c1=c1, c2=c2, delta=delta)


def gamma_at(sched: ProxSchedule, t: int) -> float:
    if not (1 <= t <= sched.T):
        raise ValueError("t=%d outside 1..%d" % (t, sched.T))
    if sched.mode == WEAKLY_CONVEX:
        return sched.gamma_const
    return sched.lam * (t - 1) / 2.0


def eta_tolerance(sched: ProxSchedule, t: int) -> float:
    """Inner-solve tolerance at iteration t; decays polynomially so the
    accumulated inexactness stays a constant factor of the exact rate."""
    if not (1 <= t <= sched.T):
        raise ValueError("t=%d outside 1..%d" % (t, sched.T))
    ratio = sched.T / sched.b
    if sched.mode == WEAKLY_CONVEX:
        lead = min(sched.c1 * math.sqrt(ratio), sched.c2 * ratio**1.5)
        return lead * sched.L * sched.D0 / t ** (2.0 + 2.0 * sched.delta)
    lead = min(sched.c1 * ratio, sched.c2 * ratio**2)
    return lead * sched.L**2 / (t ** (3.0 + 2.0 * sched.delta) * sched.lam)


def averaging_weight(sched: ProxSchedule, t: int) -> float:
    """Uniform weights for the constant schedule, 2t/(T(T+1)) for the ramp."""
    if not (1 <= t <= sched.T):
        raise ValueError("t=%d outside 1..%d" % (t, sched.T))
    if sched.mode == WEAKLY_CONVEX:
        return 1.0 / sched.T
    return 2.0 * t / (sched.T * (sched.T + 1.0))


def prox_descent_residual(
    model: LossModel,
    I: Minibatch,
    gamma: float,
    w_prev: np.ndarray,
    w_t: np.ndarray,
    w_ref: np.ndarray,
):
    """Slack of the per-iteration distance-descent inequality, with its scale.

    For the exact prox point and any reference w in the domain,

      ((lam+gamma)/gamma)||w_t - w||^2  <=  ||w_prev - w||^2
          - ||w_prev - w_t||^2 - (2/gamma)(phi_I(w_t) - phi_I(w))

    holds deterministically, batch by batch.  Returns (residual, scale) where
    residual = RHS - LHS; it must be >= -eps at floating-point scale.
    Requires gamma > 0 (the ramp's first step is not a proximal update).
    """
    if gamma <= 0:
        raise ValueError("descent residual needs gamma > 0")
    lam = model.lam
    w_prev = np.asarray(w_prev, dtype=float)
    w_t = np.asarray(w_t, dtype=float)
    w_ref = np.asarray(w_ref, dtype=float)
    d_prev_ref = float(np.sum((w_prev - w_ref) ** 2))
    d_prev_t = float(np.sum((w_prev - w_t) ** 2))
    d_t_ref = float(np.sum((w_t - w_ref) ** 2))
    phi_t = batch_value(model, w_t, I)
    phi_ref = batch_value(model, w_ref, I)
    lhs = (lam + gamma) / gamma * d_t_ref
    rhs = d_prev_ref - d_prev_t - (2.0 / gamma) * (phi_t - phi_ref)
    scale = (
        1.0
        + d_prev_ref
        + d_prev_t
        + lhs
        + (2.0 / gamma) * (abs(phi_t) + abs(phi_ref))
    )
    return rhs - lhs, scale


@dataclass
class ProxRunState:
    """Mutable run state threaded through the step functions."""

    w: np.ndarray
    t: int = 0
    avg_acc: np.ndarray | None = None
    weight_acc: float = 0.0
    samples_consumed: int = 0

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=float)
        if self.avg_acc is None:
            self.avg_acc = np.zeros_like(self.w)

    @property
    def averaged(self) -> np.ndarray:
        if self.weight_acc <= 0:
            return self.w.copy()
        return self.avg_acc / self.weight_acc

    def _advance(self, sched, w_new, b):
        self.t += 1
        self.w = w_new
        self.avg_acc = self.avg_acc + averaging_weight(sched, self.t) * w_new
        self.weight_acc += averaging_weight(sched, self.t)
        self.samples_consumed += b


# Fixed-point certification threshold for exact steps; generous relative to
# solver tolerances (1e-10 class) but far below anything a test tolerates.
_IDENTITY_TOL = 1e-6


def exact_prox_step(
    state: ProxRunState,
    sched: ProxSchedule,
    I: Minibatch,
    model: LossModel,
    domain: Domain,
) -> ProxRunState:
    """Advance one exact minibatch-prox iteration (state.t+1)."""
    t = state.t + 1
    gamma = gamma_at(sched, t)
    if gamma == 0.0:
        w_new = ls_erm_solve(model, I, domain)
    else:
        w_new = prox_solve(model, I, gamma, state.w, domain)
        resid = prox_fixed_point_residual(model, I, gamma, state.w, domain, w_new)
        scale = max(1.0, float(np.linalg.norm(w_new)), float(np.linalg.norm(state.w)))
        assert resid <= _IDENTITY_TOL * scale, (
            "prox fixed-point identity violated: residual %g at scale %g" % (resid, scale)
        )
    state._advance(sched, w_new, I.b)
    return state


def inexact_prox_step(
    state: ProxRunState,
    sched: ProxSchedule,
    I: Minibatch,
    model: LossModel,
    domain: Domain,
    inner,
    rng: np.random.Generator | None = None,
):
    """Advance one inexact iteration; returns (state, achieved_gap).

    The inner solver must hand back a point whose true subproblem gap is at
    most eta_t; for least squares the gap is measured against the exact
    solver, and a miss is an error rather than a warning.
    """
    t = state.t + 1
    gamma = gamma_at(sched, t)
    eta = eta_tolerance(sched, t)
    w_new = inner(model, I, gamma, state.w, domain, eta, rng)
    if model.kind == "least_squares":
        if gamma == 0.0:
            w_bar = ls_erm_solve(model, I, domain)
            gap = batch_value(model, w_new, I) - batch_value(model, w_bar, I)
        else:
            gap = inner_gap_oracle(model, I, gamma, state.w, domain, w_new)
        if gap > eta:
            raise RuntimeError(
                "inner solver missed its tolerance at t=%d: gap %g > eta %g" % (t, gap, eta)
            )
    else:
        gap = float("nan")
    state._advance(sched, w_new, I.b)
    return state, gap


def exact_inner(model, I, gamma, center, domain, eta, rng=None):
    """Inner solver that just calls the exact prox solve (gap is rounding-level).

    Running the inexact driver with this solver reproduces the exact driver
    bit for bit, which is one of the degenerate-reduction checks.
    """
    if gamma == 0.0:
        return ls_erm_solve(model, I, domain)
    return prox_solve(model, I, gamma, center, domain)


def make_gd_inner(max_iters: int = 500_000):
    """Projected-gradient inner solver certified against the exact minimizer.

    Runs plain projected gradient descent on the prox subproblem and stops at
    the first iterate whose true gap (least squares only) is at most eta.
    Raises if the iteration budget runs out before certification.
    """

    def gd_inner(model, I, gamma, center, domain, eta, rng=None):
        if model.kind != "least_squares":
            raise ValueError("the certified gd inner solver supports least squares only")
        center = np.asarray(center, dtype=float)
        if gamma == 0.0:
            w_bar = ls_erm_solve(model, I, domain)
            f_star = batch_value(model, w_bar, I)
            value = lambda w: batch_value(model, w, I)
            grad = lambda w: batch_grad(model, w, I)
        else:
            w_bar = prox_solve(model, I, gamma, center, domain)
            f_star = prox_objective(model, I, gamma, center, w_bar)
            value = lambda w: prox_objective(model, I, gamma, center, w)
            grad = lambda w: batch_grad(model, w, I) + gamma * (w - center)
        step = 1.0 / (model.smoothness + gamma)
        w = center.copy()
        for _ in range(max_iters):
            if value(w) - f_star <= eta:
                return w
            w = project(domain, w - step * grad(w))
        raise RuntimeError("gd inner solver exhausted %d iterations before reaching eta=%g" % (max_iters, eta))

    return gd_inner


def _uniform_in_ball(rng: np.random.Generator, d: int, radius: float) -> np.ndarray:
    g = rng.standard_normal(d)
    g /= np.linalg.norm(g)
    r = radius * rng.uniform() ** (1.0 / d)
    return r * g


def run_minibatch_prox(
    model: LossModel,
    domain: Domain,
    source,
    sched: ProxSchedule,
    seed: int,
    exact: bool = True,
    inner=None,
    evaluate=None,
    w0: np.ndarray | None = None,
    check_descent: bool = True,
    eval_stride: int | None = None,
    record_trajectory: bool = False,
) -> RunReport:
    """Single-machine minibatch-prox run.

    Draws use the machine-0 stream convention default_rng(SeedSequence((seed,
    0))) so that degenerate one-machine distributed runs replay the identical
    batches.  ``evaluate`` maps an iterate to a scalar quality measure
    (population suboptimality for synthetic sources, holdout loss otherwise)
    and is applied to the running weighted average.
    """
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0)))
    aux = np.random.default_rng(np.random.SeedSequence((seed, _AUX_STREAM)))
    d = source.dim
    if w0 is None:
        w0 = np.zeros(d)
    if not exact and inner is None:
        inner = make_gd_inner()
    if eval_stride is None:
        eval_stride = max(1, sched.T // 64)

    state = ProxRunState(w=project(domain, np.asarray(w0, dtype=float)))
    algo = "exact_prox" if exact else "inexact_prox"
    report = RunReport(
        algo=algo,
        seed=seed,
        config={
            "mode": sched.mode,
            "T": sched.T,
            "b": sched.b,
            "L": sched.L,
            "D0": sched.D0,
            "gamma_const": sched.gamma_const,
            "lam": sched.lam,
        },
    )
    subopt_by_t = []
    max_norm = float(np.linalg.norm(state.w))
    for t in range(1, sched.T + 1):
        I = draw_minibatch(source, sched.b, rng)
        w_prev = state.w
        gamma = gamma_at(sched, t)
        if exact:
            state = exact_prox_step(state, sched, I, model, domain)
            report.achieved_gaps.append(0.0)
            report.etas.append(float("nan"))
        else:
            state, gap = inexact_prox_step(state, sched, I, model, domain, inner, rng)
            report.achieved_gaps.append(gap)
            report.etas.append(eta_tolerance(sched, t))
        report.gammas.append(gamma)
        max_norm = max(max_norm, float(np.linalg.norm(state.w)))
        if check_descent and exact and gamma > 0:
            w_ref = _uniform_in_ball(aux, d, domain.B)
            resid, scale = prox_descent_residual(model, I, gamma, w_prev, state.w, w_ref)
            report.log_invariant("prox_descent", resid / scale)
        if evaluate is not None and (t % eval_stride == 0 or t == sched.T):
            sub = float(evaluate(state.averaged))
            report.subopt_series.append((state.samples_consumed, sub))
            subopt_by_t.append((t, sub))
        if record_trajectory:
            report.trajectory.append((t, state.w.copy()))
    report.w_hat = state.averaged
    if evaluate is not None:
        report.final_subopt = float(evaluate(report.w_hat))
    report.extras["subopt_by_t"] = subopt_by_t
    report.extras["max_iterate_norm"] = max_norm
    report.extras["samples_consumed"] = state.samples_consumed
    return report
