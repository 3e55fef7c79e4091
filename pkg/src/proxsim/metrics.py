"""Run reports, sweep aggregation, rate fitting, and oracle-based checks."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import losses
from .data import SyntheticLSSource, population_ls_objective
from .losses import Domain, LossModel, Minibatch, batch_value, prox_objective, prox_solve


@dataclass
class RunReport:
    """Everything a single run produces besides its iterates.

    subopt_series holds (samples_consumed, suboptimality) pairs at the
    evaluation stride; invariant_log maps a named check to its per-iteration
    residuals (e.g. "prox_descent"); achieved_gaps/etas line up with the
    iteration axis for inexact runs; ledger is the resource snapshot dict for
    simulated cluster runs and None for single-machine ones.
    """

    algo: str
    seed: int
    config: dict = field(default_factory=dict)
    gammas: list = field(default_factory=list)
    etas: list = field(default_factory=list)
    achieved_gaps: list = field(default_factory=list)
    subopt_series: list = field(default_factory=list)
    trajectory: list = field(default_factory=list)
    invariant_log: dict = field(default_factory=dict)
    ledger: dict | None = None
    w_hat: np.ndarray | None = None
    final_subopt: float | None = None
    extras: dict = field(default_factory=dict)

    def log_invariant(self, name: str, value: float) -> None:
        self.invariant_log.setdefault(name, []).append(float(value))

    def iterations_csv(self) -> str:
        """Per-iteration rows: t,gamma_t,eta_t,achieved_gap,subopt,descent_residual."""
        rows = ["t,gamma_t,eta_t,achieved_gap,subopt,descent_residual"]
        T = len(self.gammas)
        etas = self.etas if self.etas else [float("nan")] * T
        gaps = self.achieved_gaps if self.achieved_gaps else [float("nan")] * T
        descent = self.invariant_log.get("prox_descent", [float("nan")] * T)
        sub_by_t = dict(self.extras.get("subopt_by_t", []))
        for t in range(1, T + 1):
            sub = sub_by_t.get(t, float("nan"))
            rows.append(
                "%d,%s,%s,%s,%s,%s"
                % (
                    t,
                    _fmt(self.gammas[t - 1]),
                    _fmt(etas[t - 1] if t - 1 < len(etas) else float("nan")),
                    _fmt(gaps[t - 1] if t - 1 < len(gaps) else float("nan")),
                    _fmt(sub),
                    _fmt(descent[t - 1] if t - 1 < len(descent) else float("nan")),
                )
            )
        return "\n".join(rows) + "\n"

    def summary_json(self) -> str:
        worst = {k: (min(v) if v else None) for k, v in self.invariant_log.items()}
        payload = {
            "algo": self.algo,
            "seed": self.seed,
            "config": _jsonable(self.config),
            "iterations": len(self.gammas),
            "final_subopt": self.final_subopt,
            "worst_invariant_residuals": worst,
            "max_achieved_gap": max(self.achieved_gaps) if self.achieved_gaps else None,
            "ledger": self.ledger,
            "extras": _jsonable(self.extras),
        }
        return json.dumps(payload, indent=2, sort_keys=True)


def _fmt(x: float) -> str:
    return format(float(x), ".12g")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    return obj


@dataclass
class SweepResult:
    """Aggregated measurements along one axis: rows of (value, mean, stderr, n)."""

    axis: str
    values: list
    means: list
    stderrs: list
    n_seeds: list

    def __post_init__(self):
        k = len(self.values)
        if not (len(self.means) == len(self.stderrs) == len(self.n_seeds) == k):
            raise ValueError("SweepResult columns must have equal length")

    @classmethod
    def from_samples(cls, axis: str, samples: dict) -> "SweepResult":
        """samples: {axis_value: [per-seed measurements]}; keys sorted ascending."""
        values = sorted(samples)
        means, ses, ns = [], [], []
        for v in values:
            arr = np.asarray(samples[v], dtype=float)
            if arr.size == 0:
                raise ValueError("no samples for axis value %r" % (v,))
            means.append(float(arr.mean()))
            ses.append(float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else 0.0)
            ns.append(int(arr.size))
        return cls(axis, values, means, ses, ns)

    def csv(self) -> str:
        rows = ["%s,mean,stderr,n_seeds" % self.axis]
        for v, mu, se, n in zip(self.values, self.means, self.stderrs, self.n_seeds):
            rows.append("%s,%s,%s,%d" % (_fmt(v), _fmt(mu), _fmt(se), n))
        return "\n".join(rows) + "\n"


def fit_rate_slope(sweep: SweepResult):
    """Least-squares slope of log(mean) against log(axis value).

    Returns (slope, stderr_of_slope).  Requires at least 4 points and strictly
    positive means (a rate fit through zero or negative values is meaningless).
    """
    if len(sweep.values) < 4:
        raise ValueError("need at least 4 sweep points to fit a rate")
    x = np.log(np.asarray(sweep.values, dtype=float))
    means = np.asarray(sweep.means, dtype=float)
    if np.any(means <= 0):
        raise ValueError("rate fit needs positive means")
    y = np.log(means)
    n = x.size
    A = np.stack([x, np.ones(n)], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    slope = float(coef[0])
    resid = y - A @ coef
    dof = n - 2
    sigma2 = float(resid @ resid) / dof if dof > 0 else 0.0
    xbar = x.mean()
    sxx = float(np.sum((x - xbar) ** 2))
    se = math.sqrt(sigma2 / sxx) if sxx > 0 else float("inf")
    return slope, se


def inner_gap_oracle(
    model: LossModel,
    I: Minibatch,
    gamma: float,
    center: np.ndarray,
    domain: Domain,
    w_candidate: np.ndarray,
) -> float:
    """True prox-subproblem gap of a candidate, via the exact solver.

    gap = f(w_candidate) - f(w_bar) where f is the batch loss plus the
    (gamma/2)-proximity term and w_bar its exact minimizer.  Tiny negative
    values are floating-point noise and are asserted against a -1e-10 scale
    guard before being returned as is.
    """
    w_bar = prox_solve(model, I, gamma, center, domain)
    f_cand = prox_objective(model, I, gamma, center, w_candidate)
    f_star = prox_objective(model, I, gamma, center, w_bar)
    gap = f_cand - f_star
    scale = max(1.0, abs(f_star))
    assert gap >= -1e-10 * scale, (
        "oracle gap is negative beyond rounding: %g at scale %g" % (gap, scale)
    )
    return gap


def stability_bound_check(
    source: SyntheticLSSource,
    model: LossModel,
    domain: Domain,
    w_prev: np.ndarray,
    gamma: float,
    b: int,
    trials: int,
    rng: np.random.Generator,
):
    """Monte Carlo estimate of E[phi(w_t) - phi_I(w_t)] for exact prox steps.

    Each trial draws a fresh minibatch, solves the prox subproblem from
    w_prev, and measures the population-minus-batch objective gap at the
    returned point.  Returns (mean, stderr, bound) with
    bound = 4 L^2 / ((lam + gamma) * b).
    """
    if trials < 2:
        raise ValueError("need at least 2 trials for a standard error")
    gaps = np.empty(trials)
    spec = source.spec
    for i in range(trials):
        I = source.draw(b, rng)
        w_t = prox_solve(model, I, gamma, w_prev, domain)
        pop = population_ls_objective(spec, w_t, lam=model.lam)
        emp = batch_value(model, w_t, I)
        gaps[i] = pop - emp
    mean = float(gaps.mean())
    se = float(gaps.std(ddof=1) / math.sqrt(trials))
    bound = 4.0 * model.L**2 / ((model.lam + gamma) * b)
    return mean, se, bound
