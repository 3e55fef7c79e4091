"""Distributed solvers on the cluster simulator.

Four algorithm families live here, all built around the same proximal
subproblem: minimize the loss on the current (possibly sharded) minibatch
plus a quadratic pull toward the previous iterate.

* ``mp_dsvrg_run``: two nested loops.  Each outer iteration forms the
  subproblem on m freshly drawn local batches; each inner iteration averages
  local gradients (round 1), lets one designated machine sweep one of its
  sub-batches with variance-reduced stochastic updates, and broadcasts the
  new candidate (round 2).
* ``mp_dane_run``: three nested loops.  The subproblem is solved by
  gradient-corrected local solves averaged to consensus, optionally wrapped
  in an acceleration loop that adds a (kappa/2)||z - y||^2 term around
  extrapolated centers y_r.
* ``dsvrg_run``: the fixed-dataset baseline.  One machine per epoch sweeps
  its shard with variance-reduced updates against the globally averaged
  gradient, driving the ridge-regularized empirical objective.
* ``minibatch_sgd_run`` / ``emso_run``: the linearized step and the
  one-shot-averaging step, for contrast experiments.

Resource charging follows the conventions in METERING.md: one vector-op unit
per O(d) pass, so a full gradient over q samples is q units, one stochastic
update is 1 unit, and an exact least-squares solve on q samples is q + d
units.  Certification work (exact-minimizer oracles, population evaluation)
happens off the cluster and is never charged.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .cluster import ClusterSim
from .data import draw_minibatch
from .losses import (
    Domain,
    LossModel,
    Minibatch,
    batch_grad,
    batch_value,
    ls_composite_prox_solve,
    project,
    prox_objective,
    prox_solve,
    sample_grad,
    sample_grads,
)
from .metrics import RunReport, inner_gap_oracle
from .prox_core import WEAKLY_CONVEX, ProxSchedule, eta_tolerance


@dataclass(frozen=True)
class ProblemBudget:
    """Sample budget and problem constants shared by the parameter calculators.

    n_eps is the total number of samples the run may consume; eps is the
    target population suboptimality it is meant to buy (recorded for
    bookkeeping, not enforced -- the consistency n_eps ~ L^2 B^2 / eps^2 is
    the caller's business).  L is the per-sample Lipschitz constant on the
    relevant radius, B the comparator-norm bound, beta the per-sample
    smoothness, lam the strong-convexity modulus (0 for unregularized).
    """

    n_eps: int
    eps: float
    L: float
    B: float
    beta: float
    lam: float = 0.0

    def __post_init__(self):
        if self.n_eps < 1:
            raise ValueError("n_eps must be at least 1")
        if self.eps <= 0 or self.L <= 0 or self.B <= 0 or self.beta <= 0:
            raise ValueError("eps, L, B, beta must be positive")
        if self.lam < 0:
            raise ValueError("lam cannot be negative")


def budget_from_model(model: LossModel, B: float, n_eps: int, eps: float | None = None) -> ProblemBudget:
    """Budget with constants read off a loss model; eps defaults to the
    sqrt(40) L B / sqrt(n_eps) level the schedules are tuned for."""
    if eps is None:
        eps = math.sqrt(40.0) * model.L * B / math.sqrt(n_eps)
    return ProblemBudget(n_eps=n_eps, eps=eps, L=model.L, B=B, beta=model.beta, lam=model.lam)


# ---------------------------------------------------------------------------
# minibatch-prox with distributed variance-reduced inner solves
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MPDSVRGConfig:
    """Parameters of the two-loop distributed run.

    b: per-machine fresh samples per outer iteration; m: machines; T: outer
    iterations; gamma: proximal weight; K: inner iterations; p: sub-batches
    per machine (each of size b/p); eta_step: stochastic stepsize;
    literal_z_divisor: average the b/p + 1 pass iterates with divisor b/p
    instead of b/p + 1 (off by default; see svrg_inner_pass);
    padded_samples: extra samples consumed because T was rounded up.
    """

    b: int
    m: int
    T: int
    gamma: float
    K: int
    p: int
    eta_step: float
    seed: int = 0
    literal_z_divisor: bool = False
    padded_samples: int = 0

    def __post_init__(self):
        if min(self.b, self.m, self.T, self.K, self.p) < 1:
            raise ValueError("b, m, T, K, p must all be at least 1")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.eta_step < 0:
            raise ValueError("eta_step cannot be negative")
        if self.b % self.p != 0:
            raise ValueError("p=%d must divide b=%d" % (self.p, self.b))
        if self.K > self.m * self.p:
            raise ValueError(
                "K=%d inner iterations need %d sub-batches but only m*p=%d exist; "
                "a longer inner loop would reuse exhausted data" % (self.K, self.K, self.m * self.p)
            )


def _largest_divisor_at_most(n: int, cap: int) -> int:
    cap = min(cap, n)
    for q in range(cap, 0, -1):
        if n % q == 0:
            return q
    return 1


def mp_dsvrg_params(
    budget: ProblemBudget,
    b: int,
    m: int,
    eta_step: float | None = None,
    k_multiplier: float = 1.0,
    seed: int = 0,
    literal_z_divisor: bool = False,
) -> MPDSVRGConfig:
    """Plug-in parameter choices for the two-loop run.

    T = n_eps/(bm) rounded up (padding recorded), gamma = sqrt(8 n_eps) L/(bmB),
    p = round(sqrt(n_eps) L / (beta m B)) snapped down to a divisor of b, and
    K = ceil(k_multiplier * ln n_eps).  The sub-batch count is rejected when
    it rounds above b: then single samples cannot feed a whole inner pass and
    the remedy is a larger local batch.
    """
    if b < 1 or m < 1:
        raise ValueError("b and m must be at least 1")
    if budget.n_eps < m:
        raise ValueError("budget smaller than the machine count")
    T = -(-budget.n_eps // (b * m))
    padded = T * b * m - budget.n_eps
    gamma = math.sqrt(8.0 * budget.n_eps) * budget.L / (b * m * budget.B)
    p_target = math.floor(math.sqrt(budget.n_eps) * budget.L / (budget.beta * m * budget.B) + 0.5)
    if p_target > b:
        raise ValueError(
            "computed p=%d exceeds b=%d (condition number too large for this batch); grow b"
            % (p_target, b)
        )
    p = _largest_divisor_at_most(b, max(1, p_target))
    K = max(1, math.ceil(k_multiplier * math.log(budget.n_eps)))
    if eta_step is None:
        eta_step = 1.0 / (4.0 * (budget.beta + gamma))
    return MPDSVRGConfig(
        b=b, m=m, T=T, gamma=gamma, K=K, p=p, eta_step=eta_step, seed=seed,
        literal_z_divisor=literal_z_divisor, padded_samples=padded,
    )


def svrg_inner_pass(
    model: LossModel,
    sub: Minibatch,
    z_prev: np.ndarray,
    x_in: np.ndarray,
    grad_anchor: np.ndarray,
    gamma: float,
    center: np.ndarray,
    eta_step: float,
    order=None,
    literal_divisor: bool = False,
):
    """One without-replacement sweep of variance-reduced updates.

    Starting from x_in, for each sample xi in ``sub`` (visited in ``order``):

        x <- x - eta * ( grad l(x, xi) - grad l(z_prev, xi)
                         + grad_anchor + gamma * (x - center) )

    where grad_anchor is the already-averaged gradient of the full objective
    at z_prev.  Returns (x_out, z_next) with z_next the mean of all |sub|+1
    visited iterates, computed as x_in plus the mean displacement so a zero
    stepsize leaves both outputs exactly unchanged.  With
    ``literal_divisor`` the sum of |sub|+1 iterates is divided by |sub|
    instead.
    """
    z_prev = np.asarray(z_prev, dtype=float)
    x = np.asarray(x_in, dtype=float).copy()
    center = np.asarray(center, dtype=float)
    grad_anchor = np.asarray(grad_anchor, dtype=float)
    if order is None:
        order = np.arange(sub.b)
    anchor_grads = sample_grads(model, z_prev, sub)
    x0 = x.copy()
    disp_sum = np.zeros_like(x)
    for idx in order:
        g = sample_grad(model, x, sub.X[idx], float(sub.y[idx]))
        direction = g - anchor_grads[idx] + grad_anchor + gamma * (x - center)
        x = x - eta_step * direction
        disp_sum += x - x0
    n_steps = len(order)
    if literal_divisor:
        z_next = x0 + (x0 + disp_sum) / n_steps
    else:
        z_next = x0 + disp_sum / (n_steps + 1)
    return x, z_next


def _machine_rngs(seed: int, m: int, tag: int | None = None):
    if tag is None:
        return [np.random.default_rng(np.random.SeedSequence((seed, i))) for i in range(m)]
    return [np.random.default_rng(np.random.SeedSequence((seed, i, tag))) for i in range(m)]


def mp_dsvrg_run(
    cfg: MPDSVRGConfig,
    source,
    model: LossModel,
    domain: Domain,
    cluster: ClusterSim | None = None,
    evaluate=None,
    w0: np.ndarray | None = None,
    certify: bool = True,
    sched: ProxSchedule | None = None,
    eval_stride: int | None = None,
) -> RunReport:
    """Execute the two-loop distributed run and return report + ledger.

    Per outer t every machine draws b fresh samples (machine i on stream
    (seed, i)) and splits them into p contiguous sub-batches.  Per inner k:
    local gradients at z_{k-1} are averaged (1 round, b units on every
    machine), the designated machine sweeps its next sub-batch (b/p units),
    and the result is broadcast (1 round).  The sub-batch pointer advances
    s, then machine, exactly K times (K <= m p by construction).  w_t = z_K;
    the returned predictor is the uniform average of the w_t.

    With ``certify`` the run also measures, off the cluster, the true
    subproblem gap of every z_k against the union-batch exact solve and
    stores per-t final gaps next to the tolerance eta_t that the inexactness
    theory asks for at (T, b m).
    """
    if domain.kind != "unconstrained":
        raise ValueError("the distributed inner solver runs unconstrained; project afterwards if needed")
    if cluster is None:
        cluster = ClusterSim(cfg.m)
    if cluster.m != cfg.m:
        raise ValueError("cluster has %d machines, config wants %d" % (cluster.m, cfg.m))
    if sched is None:
        sched = ProxSchedule(
            WEAKLY_CONVEX, T=cfg.T, b=cfg.b * cfg.m, L=model.L, D0=domain.B, gamma_const=cfg.gamma
        )
    if eval_stride is None:
        eval_stride = max(1, cfg.T // 64)
    d = source.dim
    rngs = _machine_rngs(cfg.seed, cfg.m)
    order_rngs = _machine_rngs(cfg.seed, cfg.m, tag=1)
    w = np.zeros(d) if w0 is None else np.asarray(w0, dtype=float).copy()
    bp = cfg.b // cfg.p

    report = RunReport(algo="mp_dsvrg", seed=cfg.seed, config=asdict(cfg))
    avg_acc = np.zeros(d)
    weight_acc = 0.0
    weight = 1.0 / cfg.T
    subopt_by_t = []
    inner_gaps_by_t = []

    for t in range(1, cfg.T + 1):
        batches = []
        for i in range(cfg.m):
            batches.append(source.draw(cfg.b, rngs[i]))
            cluster.store_batch(i, cfg.b)
        w_prev = w
        z = w_prev.copy()
        x = w_prev.copy()
        j, s = 0, 0
        z_history = [z.copy()] if certify else None
        for _ in range(cfg.K):
            grads = [batch_grad(model, z, batches[i]) for i in range(cfg.m)]
            cluster.charge_all(cfg.b)
            anchor = cluster.all_average(grads)
            for i in range(cfg.m):
                cluster.touch_vectors(i, 6 if i == j else 4)
            sub = batches[j].subrange(s * bp, (s + 1) * bp)
            order = order_rngs[j].permutation(bp)
            x, z = svrg_inner_pass(
                model, sub, z, x, anchor, cfg.gamma, w_prev, cfg.eta_step,
                order=order, literal_divisor=cfg.literal_z_divisor,
            )
            cluster.charge(j, bp)
            cluster.broadcast(j, z)
            if certify:
                z_history.append(z.copy())
            s += 1
            if s >= cfg.p:
                s = 0
                j += 1
        w = z
        for i in range(cfg.m):
            cluster.release_batch(i, cfg.b)

        if certify:
            union = Minibatch.concat(batches)
            w_bar = prox_solve(model, union, cfg.gamma, w_prev, domain)
            f_star = prox_objective(model, union, cfg.gamma, w_prev, w_bar)
            gaps_k = []
            for zk in z_history:
                gap = prox_objective(model, union, cfg.gamma, w_prev, zk) - f_star
                assert gap >= -1e-10 * max(1.0, abs(f_star)), "oracle gap negative beyond rounding"
                gaps_k.append(gap)
            inner_gaps_by_t.append(gaps_k)
            report.achieved_gaps.append(gaps_k[-1])
            report.etas.append(eta_tolerance(sched, t))
        report.gammas.append(cfg.gamma)

        avg_acc = avg_acc + weight * w
        weight_acc += weight
        if evaluate is not None and (t % eval_stride == 0 or t == cfg.T):
            sub_val = float(evaluate(avg_acc / weight_acc))
            report.subopt_series.append((t * cfg.b * cfg.m, sub_val))
            subopt_by_t.append((t, sub_val))

    ledger = cluster.finish()
    report.ledger = ledger.snapshot()
    report.w_hat = avg_acc / weight_acc
    if evaluate is not None:
        report.final_subopt = float(evaluate(report.w_hat))
    report.extras["subopt_by_t"] = subopt_by_t
    report.extras["samples_consumed"] = cfg.T * cfg.b * cfg.m
    report.extras["ledger_csv"] = ledger.csv_row("mp_dsvrg", b=cfg.b, T=cfg.T, K=cfg.K)
    if certify:
        report.extras["inner_gaps_by_t"] = inner_gaps_by_t
    return report


# ---------------------------------------------------------------------------
# fixed-dataset variance-reduced baseline
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DSVRGConfig:
    """Parameters of the sharded fixed-dataset run.

    The objective is the empirical loss over all n samples plus
    (nu/2)||w||^2; linear convergence kicks in once the shard size n/m
    covers the condition number beta/nu, which the caller should arrange
    (nu = L/(B sqrt(n)) makes that n >= m^2 up to constants).
    """

    n: int
    m: int
    nu: float
    epochs: int
    eta_step: float
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ValueError("n and m must be at least 1")
        if self.n % self.m != 0:
            raise ValueError("m=%d must divide n=%d so shards are equal" % (self.m, self.n))
        if self.nu <= 0:
            raise ValueError("nu must be positive")
        if self.epochs < 0:
            raise ValueError("epochs cannot be negative")
        if self.eta_step <= 0:
            raise ValueError("eta_step must be positive")


def dsvrg_nu(model: LossModel, B: float, n: int) -> float:
    """The ridge weight L/(B sqrt(n)) that balances estimation and optimization."""
    if B <= 0 or n < 1:
        raise ValueError("need B > 0 and n >= 1")
    return model.L / (B * math.sqrt(n))


def make_shards(full: Minibatch, m: int):
    """Split a dataset into m equal contiguous shards."""
    if full.b % m != 0:
        raise ValueError("m=%d must divide the dataset size %d" % (m, full.b))
    size = full.b // m
    if size == 0:
        raise ValueError("empty shards: dataset smaller than machine count")
    return [full.subrange(i * size, (i + 1) * size) for i in range(m)]


def dsvrg_run(
    cfg: DSVRGConfig,
    shards,
    model: LossModel,
    domain: Domain,
    cluster: ClusterSim | None = None,
    evaluate=None,
    w0: np.ndarray | None = None,
    erm_oracle: bool = True,
) -> RunReport:
    """Sharded variance-reduced solve of the ridge-regularized empirical objective.

    Per epoch: every machine computes its shard gradient at the anchor and
    the cluster averages them (round 1); the rotating designated machine
    sweeps its whole shard once without replacement, treating the ridge as a
    proximal pull toward the origin; the resulting iterate average becomes
    the new anchor and is broadcast (round 2).  Exactly 2 * epochs rounds.

    With ``erm_oracle`` the report records the exact empirical suboptimality
    of the anchor after every epoch (dense/CG solve on the union, computed
    off the cluster).
    """
    if domain.kind != "unconstrained":
        raise ValueError("the fixed-dataset solver is unconstrained")
    if len(shards) != cfg.m:
        raise ValueError("want %d shards, got %d" % (cfg.m, len(shards)))
    size = cfg.n // cfg.m
    for sh in shards:
        if sh.b != size:
            raise ValueError("all shards must hold exactly n/m = %d samples" % size)
    if cluster is None:
        cluster = ClusterSim(cfg.m)
    if cluster.m != cfg.m:
        raise ValueError("cluster has %d machines, config wants %d" % (cluster.m, cfg.m))

    d = shards[0].d
    w = np.zeros(d) if w0 is None else np.asarray(w0, dtype=float).copy()
    origin = np.zeros(d)
    order_rngs = _machine_rngs(cfg.seed, cfg.m, tag=1)
    for i in range(cfg.m):
        cluster.store_batch(i, size)

    report = RunReport(algo="dsvrg", seed=cfg.seed, config=asdict(cfg))
    union = w_opt = f_opt = None
    if erm_oracle:
        union = Minibatch.concat(shards)
        w_opt = prox_solve(model, union, cfg.nu, origin, domain)
        f_opt = prox_objective(model, union, cfg.nu, origin, w_opt)

        def erm_subopt(v):
            return prox_objective(model, union, cfg.nu, origin, v) - f_opt

        subopts = [(0, erm_subopt(w))]

    for epoch in range(1, cfg.epochs + 1):
        grads = [batch_grad(model, w, shards[i]) for i in range(cfg.m)]
        cluster.charge_all(size)
        anchor = cluster.all_average(grads)
        j = (epoch - 1) % cfg.m
        for i in range(cfg.m):
            cluster.touch_vectors(i, 5 if i == j else 3)
        order = order_rngs[j].permutation(size)
        _, z_next = svrg_inner_pass(
            model, shards[j], w, w, anchor, cfg.nu, origin, cfg.eta_step, order=order
        )
        cluster.charge(j, size)
        cluster.broadcast(j, z_next)
        w = z_next
        report.gammas.append(cfg.nu)
        if erm_oracle:
            gap = erm_subopt(w)
            subopts.append((epoch, gap))
            report.subopt_series.append((epoch * 2 * size, gap))
        if evaluate is not None:
            report.log_invariant("holdout", float(evaluate(w)))

    ledger = cluster.finish()
    report.ledger = ledger.snapshot()
    report.w_hat = w
    if erm_oracle:
        report.extras["erm_subopt_by_epoch"] = subopts
        report.final_subopt = subopts[-1][1]
    report.extras["ledger_csv"] = ledger.csv_row("dsvrg", b=size, T=cfg.epochs)
    return report


# ---------------------------------------------------------------------------
# linearized baseline
# ---------------------------------------------------------------------------


def minibatch_sgd_step(
    w_prev: np.ndarray, I: Minibatch, gamma: float, model: LossModel, domain: Domain
) -> np.ndarray:
    """Linearizing the batch loss in the proximal step gives a plain
    projected gradient update with stepsize 1/gamma."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    w_prev = np.asarray(w_prev, dtype=float)
    return project(domain, w_prev - batch_grad(model, w_prev, I) / gamma)


def minibatch_sgd_gamma(model: LossModel, T: int, b: int, D0: float) -> float:
    """The tuned constant: smoothness plus sqrt(4T/b) L / D0.  The additive
    smoothness term is what caps the useful batch size of the linearized
    method -- the proximal version has no such term."""
    if T < 1 or b < 1 or D0 <= 0:
        raise ValueError("need T >= 1, b >= 1, D0 > 0")
    return model.smoothness + math.sqrt(4.0 * T / b) * model.L / D0


def minibatch_sgd_run(
    model: LossModel,
    domain: Domain,
    source,
    T: int,
    b: int,
    gamma: float,
    seed: int,
    evaluate=None,
    w0: np.ndarray | None = None,
    eval_stride: int | None = None,
) -> RunReport:
    """T linearized steps on fresh b-sample draws; returns the uniform average."""
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0)))
    d = source.dim
    w = project(domain, np.zeros(d) if w0 is None else np.asarray(w0, dtype=float))
    if eval_stride is None:
        eval_stride = max(1, T // 64)
    report = RunReport(
        algo="minibatch_sgd", seed=seed, config={"T": T, "b": b, "gamma": gamma}
    )
    avg_acc = np.zeros(d)
    weight_acc = 0.0
    subopt_by_t = []
    for t in range(1, T + 1):
        I = draw_minibatch(source, b, rng)
        w = minibatch_sgd_step(w, I, gamma, model, domain)
        report.gammas.append(gamma)
        avg_acc = avg_acc + w / T
        weight_acc += 1.0 / T
        if evaluate is not None and (t % eval_stride == 0 or t == T):
            sub = float(evaluate(avg_acc / weight_acc))
            report.subopt_series.append((t * b, sub))
            subopt_by_t.append((t, sub))
    report.w_hat = avg_acc / weight_acc
    if evaluate is not None:
        report.final_subopt = float(evaluate(report.w_hat))
    report.extras["subopt_by_t"] = subopt_by_t
    report.extras["samples_consumed"] = T * b
    return report


# ---------------------------------------------------------------------------
# gradient-corrected consensus solver with optional acceleration
# ---------------------------------------------------------------------------

LOCAL_SOLVERS = ("exact_ls", "prox_svrg", "saga", "theta_boundary")


@dataclass(frozen=True)
class MPDANEConfig:
    """Parameters of the three-loop run.

    gamma is the proximal weight of the outer subproblem; kappa the extra
    quadratic added by the acceleration wrapper (0 disables it); R the
    number of accelerated stages; K the gradient-corrected consensus steps
    per stage; theta the relative-distance accuracy of each local solve;
    alpha0 the initial extrapolation weight sqrt(gamma/(gamma+kappa));
    eta_rel the per-outer-step relative accuracy the (R, K) pair was sized
    for; precondition_ok records whether b (gamma+kappa)^2 >= 256 beta^2
    ln(md) held when the parameters were computed (stages contract reliably
    only when it does -- violating runs are allowed for ablation).
    """

    b: int
    m: int
    T: int
    gamma: float
    kappa: float
    R: int
    K: int
    theta: float = 1.0 / 6.0
    local_solver: str = "prox_svrg"
    alpha0: float = 1.0
    seed: int = 0
    eta_rel: float = 0.0
    precondition_ok: bool = True
    padded_samples: int = 0

    def __post_init__(self):
        if min(self.b, self.m, self.T, self.R, self.K) < 1:
            raise ValueError("b, m, T, R, K must all be at least 1")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.kappa < 0:
            raise ValueError("kappa cannot be negative")
        if not (0.0 < self.theta < 1.0):
            raise ValueError("theta must lie in (0, 1)")
        if self.local_solver not in LOCAL_SOLVERS:
            raise ValueError("unknown local solver %r" % (self.local_solver,))
        if not (0.0 < self.alpha0 <= 1.0):
            raise ValueError("alpha0 must lie in (0, 1]")


def catalyst_alpha_next(alpha_prev: float, q: float) -> float:
    """Next extrapolation weight: the positive root of
    a^2 + a (alpha_prev^2 - q) - alpha_prev^2 = 0, clamped to (0, 1].

    sqrt(q) is the fixed point; iterating from any start in (0, 1]
    converges to it monotonically.
    """
    if not (0.0 < alpha_prev <= 1.0):
        raise ValueError("alpha_prev must lie in (0, 1]")
    if not (0.0 < q <= 1.0):
        raise ValueError("q must lie in (0, 1]")
    c = alpha_prev * alpha_prev
    half_b = (c - q) / 2.0
    root = -half_b + math.sqrt(half_b * half_b + c)
    return min(1.0, root)


def catalyst_extrapolate(
    x_r: np.ndarray, x_prev: np.ndarray, alpha_r: float, alpha_prev: float
) -> np.ndarray:
    """y = x_r + [alpha_prev (1 - alpha_prev) / (alpha_r + alpha_prev^2)] (x_r - x_prev)."""
    denom = alpha_r + alpha_prev * alpha_prev
    if denom <= 0:
        raise ValueError("extrapolation denominator must be positive")
    coeff = alpha_prev * (1.0 - alpha_prev) / denom
    return x_r + coeff * (np.asarray(x_r, dtype=float) - np.asarray(x_prev, dtype=float))


def _local_prox_svrg(model, I, corr, gamma, kappa, cw, cy, z_prev, z_star, theta, rng,
                     max_epochs: int = 200):
    """Certified local solve by proximal variance-reduced sweeps.

    The quadratic part <corr, z> + (gamma/2)||z-cw||^2 + (kappa/2)||z-cy||^2
    goes into the proximal operator (closed form), so each sweep contracts at
    the rate set by the loss smoothness alone.  Runs sweeps until the iterate
    is within theta of the exact local minimizer (checked against z_star),
    returning (z_i, ops_charged).
    """
    target = theta * float(np.linalg.norm(z_prev - z_star))
    scale = max(1.0, float(np.linalg.norm(z_prev)), float(np.linalg.norm(z_star)))
    if target <= 128.0 * np.finfo(float).eps * scale:
        # the requested radius is below the resolution the dense reference
        # solution is itself computed to; the exact solution is the best
        # certifiable answer (deep consensus loops reach this regime)
        return z_star.copy(), 0
    eta = 1.0 / (4.0 * model.smoothness)
    shrink = 1.0 / (1.0 + eta * (gamma + kappa))
    pull = eta * (gamma * cw + kappa * cy) - eta * corr
    x = z_prev.copy()
    anchor = z_prev.copy()
    ops = 0
    b = I.b
    for _ in range(max_epochs):
        table = sample_grads(model, anchor, I)
        full = table.mean(axis=0)
        disp_sum = np.zeros_like(x)
        x0 = x.copy()
        for idx in rng.permutation(b):
            g = sample_grad(model, x, I.X[idx], float(I.y[idx]))
            v = x - eta * (g - table[idx] + full)
            x = (v + pull) * shrink
            disp_sum += x - x0
        anchor = x0 + disp_sum / (b + 1)
        ops += 2 * b
        if float(np.linalg.norm(anchor - z_star)) <= target:
            return anchor, ops
        if float(np.linalg.norm(x - z_star)) <= target:
            return x.copy(), ops
    raise RuntimeError(
        "local sweeps could not certify theta=%g within %d passes" % (theta, max_epochs)
    )


def _local_saga(model, I, corr, gamma, kappa, cw, cy, z_prev, rng):
    """One uncertified pass of table-based variance reduction (ablation solver).

    Returns (z_i, ops_charged); the achieved distance ratio is the caller's
    to record, not a promise.
    """
    b = I.b
    eta = 1.0 / (4.0 * model.smoothness)
    shrink = 1.0 / (1.0 + eta * (gamma + kappa))
    pull = eta * (gamma * cw + kappa * cy) - eta * corr
    table = sample_grads(model, z_prev, I)
    table_mean = table.mean(axis=0)
    x = z_prev.copy()
    for idx in rng.permutation(b):
        g = sample_grad(model, x, I.X[idx], float(I.y[idx]))
        x = (x - eta * (g - table[idx] + table_mean) + pull) * shrink
        table_mean = table_mean + (g - table[idx]) / b
        table[idx] = g
    return x, 2 * b


def dane_inner_step(
    cluster: ClusterSim,
    z_prev: np.ndarray,
    batches,
    model: LossModel,
    domain: Domain,
    gamma: float,
    kappa: float,
    center_w: np.ndarray,
    center_y: np.ndarray,
    theta: float,
    local_solver: str,
    solver_rngs=None,
    ratio_out: list | None = None,
) -> np.ndarray:
    """One gradient-corrected consensus step (2 communication rounds).

    Round 1 averages local gradients at z_prev.  Each machine i then solves

        min_z  phi_i(z) + <gbar - g_i, z> + (gamma/2)||z - center_w||^2
                                          + (kappa/2)||z - center_y||^2

    to relative distance accuracy ||z_i - z_i*|| <= theta ||z_prev - z_i*||,
    certified against the exact minimizer for least squares.  Round 2
    averages the local solutions.  ``ratio_out``, when given, collects the
    achieved per-machine distance ratios.
    """
    m = cluster.m
    if len(batches) != m:
        raise ValueError("need one batch per machine")
    if local_solver not in LOCAL_SOLVERS:
        raise ValueError("unknown local solver %r" % (local_solver,))
    if local_solver in ("prox_svrg", "saga") and domain.kind != "unconstrained":
        raise ValueError("stochastic local solvers run unconstrained")
    z_prev = np.asarray(z_prev, dtype=float)
    cw = np.asarray(center_w, dtype=float)
    cy = np.asarray(center_y, dtype=float)
    d = z_prev.shape[0]
    b = batches[0].b

    grads = [batch_grad(model, z_prev, batches[i]) for i in range(m)]
    cluster.charge_all(b)
    gbar = cluster.all_average(grads)

    prox_terms = [(gamma, cw), (kappa, cy)]
    locals_z = []
    for i in range(m):
        corr = gbar - grads[i]
        z_star = ls_composite_prox_solve(model, batches[i], corr, prox_terms, domain)
        if local_solver == "exact_ls":
            z_i, ops = z_star, b + d
        elif local_solver == "theta_boundary":
            u = solver_rngs[i].standard_normal(d)
            u /= np.linalg.norm(u)
            z_i = z_star + theta * float(np.linalg.norm(z_prev - z_star)) * u
            ops = b + d
        elif local_solver == "prox_svrg":
            z_i, ops = _local_prox_svrg(
                model, batches[i], corr, gamma, kappa, cw, cy, z_prev, z_star, theta,
                solver_rngs[i],
            )
        else:
            z_i, ops = _local_saga(
                model, batches[i], corr, gamma, kappa, cw, cy, z_prev, solver_rngs[i]
            )
        cluster.charge(i, ops)
        cluster.touch_vectors(i, 6)
        if ratio_out is not None:
            denom = float(np.linalg.norm(z_prev - z_star))
            num = float(np.linalg.norm(z_i - z_star))
            ratio_out.append(num / denom if denom > 0 else 0.0)
        locals_z.append(z_i)
    return cluster.all_average(locals_z)


def mp_dane_params(
    budget: ProblemBudget,
    b: int,
    m: int,
    d: int,
    c1: float = 1e-4,
    c2: float = 1e-4,
    delta: float = 0.5,
    local_solver: str = "prox_svrg",
    seed: int = 0,
) -> MPDANEConfig:
    """Parameter calculator for the three-loop run.

    The pivot batch size is b* = n_eps L^2 / (32 m^2 beta^2 B^2 ln(md)).
    Below it a single unaccelerated stage suffices (kappa = 0, R = 1); above
    it kappa = 16 beta sqrt(ln(md)/b) - gamma restores the Hessian
    concentration the consensus steps need, and R accelerated stages with a
    geometric per-stage target are sized so the final subproblem gap falls
    below the tolerance eta_T of the outer inexactness schedule, relative to
    the L^2/gamma initial-gap bound.  K always comes from halving the
    distance by 3/4 per consensus step.
    """
    if b < 1 or m < 1 or d < 1:
        raise ValueError("b, m, d must be at least 1")
    if budget.n_eps < m:
        raise ValueError("budget smaller than the machine count")
    T = -(-budget.n_eps // (b * m))
    padded = T * b * m - budget.n_eps
    L, B, beta = budget.L, budget.B, budget.beta
    gamma = math.sqrt(8.0 * budget.n_eps) * L / (b * m * B)
    ln_md = math.log(m * d)
    b_star = budget.n_eps * L * L / (32.0 * m * m * beta * beta * B * B * ln_md)

    sched = ProxSchedule(
        WEAKLY_CONVEX, T=T, b=b * m, L=L, D0=B, gamma_const=gamma, c1=c1, c2=c2, delta=delta
    )
    eta_rel = eta_tolerance(sched, T) * gamma / (L * L)

    log43 = math.log(4.0 / 3.0)
    if b <= b_star:
        kappa = 0.0
        R = 1
        K = math.ceil(0.5 * math.log((beta + gamma) / (gamma * eta_rel)) / log43)
    else:
        kappa = max(0.0, 16.0 * beta * math.sqrt(ln_md / b) - gamma)
        q = gamma / (gamma + kappa)
        R = math.ceil(
            (10.0 / 9.0) * math.sqrt((gamma + kappa) / gamma)
            * math.log(800.0 * (gamma + kappa) / (gamma * eta_rel))
        )
        R = max(1, R)
        stage_target = (2.0 / 9.0) * (1.0 - 0.9 * math.sqrt(q)) ** R
        K = math.ceil(
            0.5 * math.log((beta + gamma + kappa) / ((gamma + kappa) * stage_target)) / log43
        )
    K = max(1, K)
    precondition_ok = b * (gamma + kappa) ** 2 >= 256.0 * beta * beta * ln_md * (1.0 - 1e-9)
    alpha0 = math.sqrt(gamma / (gamma + kappa))
    return MPDANEConfig(
        b=b, m=m, T=T, gamma=gamma, kappa=kappa, R=R, K=K, theta=1.0 / 6.0,
        local_solver=local_solver, alpha0=alpha0, seed=seed, eta_rel=eta_rel,
        precondition_ok=precondition_ok, padded_samples=padded,
    )


def mp_dane_run(
    cfg: MPDANEConfig,
    source,
    model: LossModel,
    domain: Domain,
    cluster: ClusterSim | None = None,
    evaluate=None,
    w0: np.ndarray | None = None,
    certify: bool = True,
    sched: ProxSchedule | None = None,
    eval_stride: int | None = None,
) -> RunReport:
    """Execute the three-loop run: T outer proximal steps, each solved by R
    accelerated stages of K gradient-corrected consensus steps.

    Per outer t the stage state starts at x_0 = y_0 = w_{t-1}; each stage
    initializes z at the extrapolated center y_{r-1}, runs K consensus steps
    on the kappa-augmented subproblem, sets x_r = z_K, and extrapolates.
    w_t = x_R; the returned predictor is the uniform average.

    With ``certify`` the run records, off the cluster: the per-consensus-step
    distance contraction toward the exact stage minimizer (invariant
    "dane_contraction"), the per-machine local solve ratios (invariant
    "local_theta_ratio"), and the per-t subproblem gap of w_t against the
    union-batch exact solve next to the schedule tolerance eta_t.
    """
    if cfg.local_solver in ("prox_svrg", "saga") and domain.kind != "unconstrained":
        raise ValueError("stochastic local solvers run unconstrained")
    if cluster is None:
        cluster = ClusterSim(cfg.m)
    if cluster.m != cfg.m:
        raise ValueError("cluster has %d machines, config wants %d" % (cluster.m, cfg.m))
    if sched is None:
        sched = ProxSchedule(
            WEAKLY_CONVEX, T=cfg.T, b=cfg.b * cfg.m, L=model.L, D0=domain.B, gamma_const=cfg.gamma
        )
    if eval_stride is None:
        eval_stride = max(1, cfg.T // 64)
    d = source.dim
    rngs = _machine_rngs(cfg.seed, cfg.m)
    solver_rngs = _machine_rngs(cfg.seed, cfg.m, tag=1)
    w = np.zeros(d) if w0 is None else np.asarray(w0, dtype=float).copy()
    q = cfg.gamma / (cfg.gamma + cfg.kappa)

    report = RunReport(algo="mp_dane", seed=cfg.seed, config=asdict(cfg))
    if not cfg.precondition_ok:
        report.extras["precondition_violated"] = True
    avg_acc = np.zeros(d)
    weight_acc = 0.0
    weight = 1.0 / cfg.T
    subopt_by_t = []

    for t in range(1, cfg.T + 1):
        batches = []
        for i in range(cfg.m):
            batches.append(source.draw(cfg.b, rngs[i]))
            cluster.store_batch(i, cfg.b)
        union = Minibatch.concat(batches) if certify else None
        w_prev = w
        x = w_prev.copy()
        y = w_prev.copy()
        alpha = cfg.alpha0
        for _ in range(cfg.R):
            z = y.copy()
            x_star = None
            if certify:
                x_star = ls_composite_prox_solve(
                    model, union, np.zeros(d), [(cfg.gamma, w_prev), (cfg.kappa, y)], domain
                )
            for _ in range(cfg.K):
                ratios = [] if certify else None
                z_old = z
                z = dane_inner_step(
                    cluster, z, batches, model, domain, cfg.gamma, cfg.kappa,
                    w_prev, y, cfg.theta, cfg.local_solver, solver_rngs, ratio_out=ratios,
                )
                if certify:
                    for rr in ratios:
                        report.log_invariant("local_theta_ratio", rr)
                    denom = float(np.linalg.norm(z_old - x_star))
                    if denom > 0:
                        report.log_invariant(
                            "dane_contraction", float(np.linalg.norm(z - x_star)) / denom
                        )
            x_prev = x
            x = z
            alpha_next = catalyst_alpha_next(alpha, q)
            y = catalyst_extrapolate(x, x_prev, alpha_next, alpha)
            alpha = alpha_next
        w = x
        for i in range(cfg.m):
            cluster.release_batch(i, cfg.b)

        if certify:
            gap = inner_gap_oracle(model, union, cfg.gamma, w_prev, domain, w)
            report.achieved_gaps.append(gap)
            report.etas.append(eta_tolerance(sched, t))
        report.gammas.append(cfg.gamma)

        avg_acc = avg_acc + weight * w
        weight_acc += weight
        if evaluate is not None and (t % eval_stride == 0 or t == cfg.T):
            sub_val = float(evaluate(avg_acc / weight_acc))
            report.subopt_series.append((t * cfg.b * cfg.m, sub_val))
            subopt_by_t.append((t, sub_val))

    ledger = cluster.finish()
    report.ledger = ledger.snapshot()
    report.w_hat = avg_acc / weight_acc
    if evaluate is not None:
        report.final_subopt = float(evaluate(report.w_hat))
    report.extras["subopt_by_t"] = subopt_by_t
    report.extras["samples_consumed"] = cfg.T * cfg.b * cfg.m
    report.extras["ledger_csv"] = ledger.csv_row("mp_dane", b=cfg.b, T=cfg.T, K=cfg.K, R=cfg.R)
    return report


# ---------------------------------------------------------------------------
# one-shot averaging (ablation)
# ---------------------------------------------------------------------------


def emso_step(
    cluster: ClusterSim,
    batches,
    model: LossModel,
    gamma: float,
    center: np.ndarray,
    domain: Domain,
) -> np.ndarray:
    """Each machine solves its own local proximal subproblem exactly and the
    solutions are averaged in one round.  Cheap, but the average of local
    minimizers is not the minimizer of the average -- kept for contrast."""
    m = cluster.m
    if len(batches) != m:
        raise ValueError("need one batch per machine")
    locals_w = []
    for i in range(m):
        locals_w.append(prox_solve(model, batches[i], gamma, center, domain))
        cluster.charge(i, batches[i].b + batches[i].d)
        cluster.touch_vectors(i, 3)
    return cluster.all_average(locals_w)


def emso_run(
    model: LossModel,
    domain: Domain,
    source,
    T: int,
    b: int,
    m: int,
    gamma: float,
    seed: int,
    cluster: ClusterSim | None = None,
    evaluate=None,
    w0: np.ndarray | None = None,
    eval_stride: int | None = None,
) -> RunReport:
    """T one-shot-averaging proximal steps (1 round each); uniform average."""
    if cluster is None:
        cluster = ClusterSim(m)
    if eval_stride is None:
        eval_stride = max(1, T // 64)
    rngs = _machine_rngs(seed, m)
    d = source.dim
    w = project(domain, np.zeros(d) if w0 is None else np.asarray(w0, dtype=float))
    report = RunReport(algo="emso", seed=seed, config={"T": T, "b": b, "m": m, "gamma": gamma})
    avg_acc = np.zeros(d)
    weight_acc = 0.0
    subopt_by_t = []
    for t in range(1, T + 1):
        batches = []
        for i in range(m):
            batches.append(source.draw(b, rngs[i]))
            cluster.store_batch(i, b)
        w = emso_step(cluster, batches, model, gamma, w, domain)
        for i in range(m):
            cluster.release_batch(i, b)
        report.gammas.append(gamma)
        avg_acc = avg_acc + w / T
        weight_acc += 1.0 / T
        if evaluate is not None and (t % eval_stride == 0 or t == T):
            sub = float(evaluate(avg_acc / weight_acc))
            report.subopt_series.append((t * b * m, sub))
            subopt_by_t.append((t, sub))
    ledger = cluster.finish()
    report.ledger = ledger.snapshot()
    report.w_hat = avg_acc / weight_acc
    if evaluate is not None:
        report.final_subopt = float(evaluate(report.w_hat))
    report.extras["subopt_by_t"] = subopt_by_t
    report.extras["samples_consumed"] = T * b * m
    report.extras["ledger_csv"] = ledger.csv_row("emso", b=b, T=T)
    return report
