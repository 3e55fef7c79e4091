"""Reports, sweep aggregation, slope fits, and the measurement oracles."""

import json
import math

import numpy as np
import pytest

from _oracles import dense_prox_solution
from proxsim import (
    Domain,
    Minibatch,
    RunReport,
    SweepResult,
    SyntheticLSSource,
    SyntheticLSSpec,
    fit_rate_slope,
    inner_gap_oracle,
    least_squares_model,
    stability_bound_check,
)


def test_sweep_result_from_samples_sorts_and_aggregates():
    sw = SweepResult.from_samples("b", {64: [2.0, 4.0], 8: [1.0, 3.0, 5.0]})
    assert sw.values == [8, 64]
    assert sw.means == [3.0, 3.0]
    assert sw.n_seeds == [3, 2]
    # ddof=1 standard error: std([1,3,5])=2, /sqrt(3)
    assert abs(sw.stderrs[0] - 2.0 / math.sqrt(3)) < 1e-12
    assert abs(sw.stderrs[1] - math.sqrt(2.0) / math.sqrt(2)) < 1e-12


def test_sweep_result_rejects_ragged_columns_and_empty_cells():
    with pytest.raises(ValueError):
        SweepResult("b", [1, 2], [0.1], [0.0, 0.0], [1, 1])
    with pytest.raises(ValueError):
        SweepResult.from_samples("b", {1: []})


def test_fit_rate_slope_recovers_an_exact_power_law():
    xs = [2**k for k in range(4, 10)]
    sw = SweepResult.from_samples("bT", {x: [3.7 * x**-0.5] for x in xs})
    slope, se = fit_rate_slope(sw)
    assert abs(slope + 0.5) < 1e-12
    assert se < 1e-12


def test_fit_rate_slope_guards():
    sw = SweepResult.from_samples("bT", {1: [1.0], 2: [0.5], 4: [0.25]})
    with pytest.raises(ValueError):
        fit_rate_slope(sw)  # needs at least 4 points
    sw2 = SweepResult.from_samples("bT", {1: [1.0], 2: [0.5], 4: [-0.1], 8: [0.1]})
    with pytest.raises(ValueError):
        fit_rate_slope(sw2)  # negative means are not a rate


def _instance(d=4, seed=0):
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(d)
    w /= np.linalg.norm(w)
    spec = SyntheticLSSpec(d=d, w_star=w, beta=1.0, sigma=0.1)
    model = least_squares_model(beta=1.0, y_max=1.1, radius=2.0)
    return spec, SyntheticLSSource(spec), model


def test_inner_gap_oracle_zero_at_the_solution_and_quadratic_nearby():
    spec, src, model = _instance()
    I = src.draw(32, np.random.default_rng(1))
    center = np.zeros(4)
    gamma = 0.8
    dom = Domain.unconstrained(5.0)
    w_bar = dense_prox_solution(I, gamma, center)
    assert inner_gap_oracle(model, I, gamma, center, dom, w_bar) < 1e-12
    delta = np.array([0.01, -0.02, 0.005, 0.0])
    H = I.X.T @ I.X / I.b + gamma * np.eye(4)
    expected = 0.5 * float(delta @ H @ delta)
    got = inner_gap_oracle(model, I, gamma, center, dom, w_bar + delta)
    assert abs(got - expected) < 1e-10


def test_stability_bound_check_scales_and_holds():
    spec, src, model = _instance(seed=2)
    rng = np.random.default_rng(3)
    mean, se, bound = stability_bound_check(
        src, model, Domain.unconstrained(5.0), np.zeros(4), gamma=1.0, b=16, trials=300, rng=rng
    )
    assert bound == 4.0 * model.L**2 / (1.0 * 16)
    assert abs(mean) <= bound + 3 * se
    with pytest.raises(ValueError):
        stability_bound_check(
            src, model, Domain.unconstrained(5.0), np.zeros(4), 1.0, 16, trials=1, rng=rng
        )


def test_run_report_serialization_round_trips():
    rep = RunReport(algo="exact_prox", seed=3, config={"T": 4})
    rep.gammas = [1.0, 1.0]
    rep.subopt_series = [(16, 0.5), (32, 0.25)]
    rep.final_subopt = 0.25
    rep.w_hat = np.array([0.1, 0.2])
    rep.log_invariant("prox_descent", 1e-9)
    blob = json.loads(rep.summary_json())
    assert blob["algo"] == "exact_prox"
    assert blob["final_subopt"] == 0.25
    csv = rep.iterations_csv()
    lines = csv.strip().split("\n")
    assert len(lines) == 3  # header + one row per recorded iteration
    assert lines[0] == "t,gamma_t,eta_t,achieved_gap,subopt,descent_residual"
    assert lines[1].startswith("1,")
