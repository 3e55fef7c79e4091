"""Acceptance battery: one test per numbered guarantee of the library.

Each test exercises a full advertised behavior (statistical rates, exact
resource counts, bit-exact degenerate reductions, determinism) at desk
scale.  conftest.py rolls the outcomes into a per-criterion pass/fail table
at the end of the session; tests drop a one-line metric summary into
DETAILS so the table shows the measured numbers, not just verdicts.
"""

import math
import os
import time
from dataclasses import replace

import numpy as np

from _oracles import svrg_epoch_single_machine
from proxsim import (
    ClusterSim,
    DSVRGConfig,
    ExperimentConfig,
    MPDANEConfig,
    MPDSVRGConfig,
    Minibatch,
    ProxSchedule,
    SweepResult,
    WEAKLY_CONVEX,
    batch_grad,
    budget_from_model,
    build_instance,
    catalyst_alpha_next,
    dane_inner_step,
    dsvrg_nu,
    dsvrg_run,
    exact_inner,
    fit_rate_slope,
    ls_composite_prox_solve,
    make_shards,
    minibatch_sgd_gamma,
    minibatch_sgd_run,
    mp_dane_params,
    mp_dane_run,
    mp_dsvrg_params,
    mp_dsvrg_run,
    run_minibatch_prox,
    stability_bound_check,
    strongly_convex_schedule,
    svrg_inner_pass,
    weakly_convex_schedule,
)
from proxsim.suites import suite_anyb

# filled by the tests, printed by conftest next to each criterion line
DETAILS = {}


def _instance(**kw):
    cfg = ExperimentConfig(name="acceptance", algo="exact_prox", seeds=[0], **kw)
    return build_instance(cfg)


def test_c01_distance_descent_every_iteration():
    t0 = time.monotonic()
    T, b = 1000, 16
    worst = {}
    for label, lam in (("const", 0.0), ("ramp", 0.5)):
        model, domain, source, _ = _instance(
            d=20, sigma=0.1, w_star_norm=0.9, domain_kind="ball", B=1.0, lam=lam
        )
        if label == "const":
            sched = weakly_convex_schedule(T, b, model.L, domain.B)
        else:
            sched = strongly_convex_schedule(T, b, model.L, lam, domain.B)
        rep = run_minibatch_prox(model, domain, source, sched, seed=11)
        res = rep.invariant_log["prox_descent"]
        # the ramp's first step has no proximal pull, so no inequality there
        assert len(res) == (T if label == "const" else T - 1)
        worst[label] = min(res)
        assert worst[label] >= -1e-7
    elapsed = time.monotonic() - t0
    assert elapsed < 10.0
    DETAILS[1] = "worst residual/scale const=%.2e ramp=%.2e (%.1fs)" % (
        worst["const"], worst["ramp"], elapsed,
    )


def test_c02_mean_subopt_under_statistical_bound():
    t0 = time.monotonic()
    bT, b, n_seeds = 4096, 16, 20
    model, domain, source, evaluate = _instance(
        d=20, sigma=0.1, w_star_norm=1.0, domain_kind="ball", B=2.0
    )
    sched = weakly_convex_schedule(bT // b, b, model.L, domain.B)
    finals = np.array([
        evaluate(run_minibatch_prox(model, domain, source, sched, seed,
                                    check_descent=False).w_hat)
        for seed in range(n_seeds)
    ])
    mean = float(finals.mean())
    se = float(finals.std(ddof=1) / math.sqrt(n_seeds))
    bound = math.sqrt(8.0) * model.L * domain.B / math.sqrt(bT)
    elapsed = time.monotonic() - t0
    assert mean + 2.0 * se <= bound
    assert elapsed < 120.0
    DETAILS[2] = "mean+2SE=%.4f <= bound=%.4f (%.1fs)" % (mean + 2 * se, bound, elapsed)


def test_c03_rate_slopes_for_both_schedules():
    t0 = time.monotonic()
    budgets = [2 ** k for k in range(7, 14)]
    b, n_seeds = 8, 20

    model, domain, source, evaluate = _instance(
        d=4, sigma=0.1, w_star_norm=1.0, domain_kind="ball", B=1.0
    )
    samples = {
        bT: [
            evaluate(run_minibatch_prox(
                model, domain, source,
                weakly_convex_schedule(bT // b, b, model.L, domain.B),
                seed, check_descent=False,
            ).w_hat)
            for seed in range(n_seeds)
        ]
        for bT in budgets
    }
    slope_w, _ = fit_rate_slope(SweepResult.from_samples("bT", samples))
    assert abs(slope_w - (-0.5)) <= 0.12

    model, domain, source, evaluate = _instance(
        d=4, sigma=0.1, w_star_norm=0.9, domain_kind="unconstrained", B=1.0, lam=0.5
    )
    samples = {
        bT: [
            evaluate(run_minibatch_prox(
                model, domain, source,
                strongly_convex_schedule(bT // b, b, model.L, 0.5, domain.B),
                seed, check_descent=False,
            ).w_hat)
            for seed in range(n_seeds)
        ]
        for bT in budgets
    }
    slope_s, _ = fit_rate_slope(SweepResult.from_samples("bT", samples))
    elapsed = time.monotonic() - t0
    assert abs(slope_s - (-1.0)) <= 0.2
    assert elapsed < 300.0
    DETAILS[3] = "slopes: weak %.3f (want -0.5+-0.12), strong %.3f (want -1.0+-0.2)" % (
        slope_w, slope_s,
    )


def test_c04_batch_size_invariance_vs_sgd_degradation():
    t0 = time.monotonic()
    bT, n_seeds = 8192, 20
    bs = [1, 8, 64, 512]
    model, domain, source, evaluate = _instance(
        d=4, sigma=0.1, w_star_norm=1.0, domain_kind="ball", B=1.0
    )
    prox_mean, sgd_mean = {}, {}
    for b in bs:
        T = bT // b
        sched = weakly_convex_schedule(T, b, model.L, domain.B)
        prox_mean[b] = float(np.mean([
            evaluate(run_minibatch_prox(model, domain, source, sched, seed,
                                        check_descent=False).w_hat)
            for seed in range(n_seeds)
        ]))
        gam = minibatch_sgd_gamma(model, T, b, domain.B)
        sgd_mean[b] = float(np.mean([
            evaluate(minibatch_sgd_run(model, domain, source, T, b, gam, seed).w_hat)
            for seed in range(n_seeds)
        ]))
    ratio = max(prox_mean.values()) / min(prox_mean.values())
    degradation = sgd_mean[512] / sgd_mean[1]
    elapsed = time.monotonic() - t0
    assert ratio <= 2.0
    assert degradation >= 2.0
    assert elapsed < 300.0
    DETAILS[4] = "prox max/min=%.2f (cap 2.0); sgd b=512 is %.1fx its b=1 (%.0fs)" % (
        ratio, degradation, elapsed,
    )


def test_c05_stability_bound_and_inverse_b_slope():
    t0 = time.monotonic()
    model, domain, source, _ = _instance(
        d=10, sigma=0.1, w_star_norm=0.9, domain_kind="unconstrained", B=2.0
    )
    w_prev = np.zeros(10)
    gamma, trials = 1.0, 2000
    rng = np.random.default_rng(np.random.SeedSequence((17, 986960441)))
    mean, se, bound = stability_bound_check(
        source, model, domain, w_prev, gamma, 16, trials, rng
    )
    assert abs(mean) <= bound + 3.0 * se

    mags = []
    bs = [16, 64, 256]
    for b in bs:
        rng = np.random.default_rng(np.random.SeedSequence((b, 986960441)))
        m_b, _, _ = stability_bound_check(
            source, model, domain, w_prev, gamma, b, trials, rng
        )
        mags.append(abs(m_b))
    slope = float(np.polyfit(np.log(bs), np.log(mags), 1)[0])
    elapsed = time.monotonic() - t0
    assert abs(slope - (-1.0)) <= 0.3
    assert elapsed < 120.0
    DETAILS[5] = "|mean|=%.4f vs bound+3SE=%.4f; slope vs b %.3f (%.0fs)" % (
        abs(mean), bound + 3 * se, slope, elapsed,
    )


def test_c06_inner_gaps_meet_schedule_tolerances():
    d, b, m, T = 10, 64, 4, 32
    model, domain, source, _ = _instance(
        d=d, sigma=0.1, w_star_norm=0.9, domain_kind="unconstrained", B=2.0
    )
    budget = budget_from_model(model, domain.B, b * m * T)

    cfg1 = mp_dsvrg_params(budget, b, m, seed=0)
    cfg1 = replace(cfg1, eta_step=1.0 / (model.beta + cfg1.gamma))
    rep1 = mp_dsvrg_run(cfg1, source, model, domain, certify=True)
    assert cfg1.T == T and len(rep1.achieved_gaps) == T
    worst1 = max(g / e for g, e in zip(rep1.achieved_gaps, rep1.etas))
    assert all(g <= e for g, e in zip(rep1.achieved_gaps, rep1.etas))

    cfg2 = mp_dane_params(budget, b, m, d, local_solver="exact_ls", seed=0)
    rep2 = mp_dane_run(cfg2, source, model, domain, certify=True)
    assert cfg2.T == T and len(rep2.achieved_gaps) == T
    worst2 = max(g / e for g, e in zip(rep2.achieved_gaps, rep2.etas))
    assert all(g <= e for g, e in zip(rep2.achieved_gaps, rep2.etas))

    DETAILS[6] = "worst gap/eta: two-loop %.2e (K=%d,p=%d), consensus %.2e (K=%d)" % (
        worst1, cfg1.K, cfg1.p, worst2, cfg2.K,
    )


def test_c07_resource_identities_exact():
    model, domain, source, _ = _instance(
        d=6, sigma=0.1, w_star_norm=0.9, domain_kind="unconstrained", B=2.0
    )
    budget = budget_from_model(model, domain.B, 2048)

    c1 = mp_dsvrg_params(budget, 32, 4, seed=0)
    led1 = mp_dsvrg_run(c1, source, model, domain, certify=False).ledger
    assert led1["rounds"] == 2 * c1.K * c1.T
    assert led1["ops_parallel"] == c1.K * c1.T * (c1.b + c1.b // c1.p)
    assert led1["peak_samples"] == c1.b
    assert led1["vectors_sent_per_machine"] == 2 * c1.K * c1.T

    c2 = mp_dane_params(budget, 32, 4, 6, local_solver="exact_ls", seed=0)
    led2 = mp_dane_run(c2, source, model, domain, certify=False).ledger
    assert led2["rounds"] == 2 * c2.K * c2.R * c2.T
    assert led2["peak_samples"] == c2.b

    n, m = 2048, 4
    full = source.draw(n, np.random.default_rng(np.random.SeedSequence((0, 2))))
    nu = dsvrg_nu(model, domain.B, n)
    c3 = DSVRGConfig(n=n, m=m, nu=nu, epochs=8,
                     eta_step=1.0 / (4.0 * (model.beta + nu)), seed=0)
    led3 = dsvrg_run(c3, make_shards(full, m), model, domain, erm_oracle=False).ledger
    assert led3["rounds"] == 2 * c3.epochs
    assert led3["peak_samples"] == n // m

    DETAILS[7] = "two-loop 2KT=%d KT(b+b/p)=%d; consensus 2KRT=%d; fixed-data 2E=%d" % (
        led1["rounds"], led1["ops_parallel"], led2["rounds"], led3["rounds"],
    )


def test_c08_consensus_contraction_rate():
    d, b, m, theta = 10, 64, 4, 1.0 / 6.0
    gamma = kappa = 2.0
    steps, n_seeds = 8, 10
    model, domain, source, _ = _instance(
        d=d, sigma=0.1, w_star_norm=0.9, domain_kind="unconstrained", B=2.0
    )
    # concentration precondition under which the 0.75 factor is promised
    assert b * (gamma + kappa) ** 2 >= 256.0 * model.beta ** 2 * math.log(m * d)

    ratios = []
    for seed in range(n_seeds):
        rngs = [np.random.default_rng(np.random.SeedSequence((seed, i))) for i in range(m)]
        solver_rngs = [
            np.random.default_rng(np.random.SeedSequence((seed, i, 1))) for i in range(m)
        ]
        batches = [source.draw(b, rngs[i]) for i in range(m)]
        union = Minibatch.concat(batches)
        cw = cy = np.zeros(d)
        x_star = ls_composite_prox_solve(
            model, union, np.zeros(d), [(gamma, cw), (kappa, cy)], domain
        )
        cluster = ClusterSim(m)
        z = np.zeros(d)
        for _ in range(steps):
            z_new = dane_inner_step(
                cluster, z, batches, model, domain, gamma, kappa, cw, cy,
                theta, "theta_boundary", solver_rngs=solver_rngs,
            )
            den = float(np.linalg.norm(z - x_star))
            ratios.append(float(np.linalg.norm(z_new - x_star)) / den)
            z = z_new
    assert len(ratios) == steps * n_seeds
    assert all(r <= 0.75 for r in ratios)
    DETAILS[8] = "max per-step ratio %.3f over %d steps (cap 0.75)" % (
        max(ratios), len(ratios),
    )


def test_c09_degenerate_reductions_bit_exact():
    model, domain, source, _ = _instance(
        d=6, sigma=0.1, w_star_norm=0.9, domain_kind="unconstrained", B=2.0
    )
    T, b, gamma, seed = 8, 16, 1.5, 3
    sched = ProxSchedule(WEAKLY_CONVEX, T=T, b=b, L=model.L, D0=domain.B,
                         gamma_const=gamma)
    ref = run_minibatch_prox(model, domain, source, sched, seed)

    # one machine, no acceleration, exact local solves == plain prox loop
    dane_cfg = MPDANEConfig(b=b, m=1, T=T, gamma=gamma, kappa=0.0, R=1, K=1,
                            local_solver="exact_ls", alpha0=1.0, seed=seed)
    got = mp_dane_run(dane_cfg, source, model, domain, certify=False)
    assert np.array_equal(ref.w_hat, got.w_hat)

    # one machine, one sub-batch, one inner pass == one plain sweep per step
    eta = 0.04
    svrg_cfg = MPDSVRGConfig(b=b, m=1, T=T, gamma=gamma, K=1, p=1,
                             eta_step=eta, seed=seed)
    got2 = mp_dsvrg_run(svrg_cfg, source, model, domain, certify=False)
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0)))
    order_rng = np.random.default_rng(np.random.SeedSequence((seed, 0, 1)))
    w = np.zeros(source.dim)
    acc = np.zeros(source.dim)
    wacc = 0.0
    w_raw = np.zeros(source.dim)  # independent raw-numpy replay of the same run
    acc_raw = np.zeros(source.dim)
    for _ in range(T):
        I = source.draw(b, rng)
        order = order_rng.permutation(b)
        anchor = batch_grad(model, w, I)
        _, z = svrg_inner_pass(model, I, w, w.copy(), anchor, gamma, w, eta,
                               order=order)
        w = z
        acc = acc + (1.0 / T) * w
        wacc += 1.0 / T
        _, z_raw = svrg_epoch_single_machine(model.lam, I, w_raw, gamma, eta, order)
        w_raw = z_raw
        acc_raw = acc_raw + (1.0 / T) * w_raw
    assert np.array_equal(got2.w_hat, acc / wacc)
    assert np.allclose(got2.w_hat, acc_raw / wacc, rtol=0, atol=1e-12)

    # a zero inner-error budget turns the inexact driver into the exact one
    red = run_minibatch_prox(model, domain, source, sched, seed,
                             exact=False, inner=exact_inner)
    assert np.array_equal(ref.w_hat, red.w_hat)

    DETAILS[9] = "all three reductions bitwise equal (T=%d, b=%d)" % (T, b)


def test_c10_fixed_dataset_linear_convergence():
    n, m, d = 4096, 4, 10
    model, domain, source, _ = _instance(
        d=d, sigma=0.1, w_star_norm=0.9, domain_kind="unconstrained", B=2.0
    )
    full = source.draw(n, np.random.default_rng(np.random.SeedSequence((0, 2))))
    nu = dsvrg_nu(model, domain.B, n)
    cfg = DSVRGConfig(n=n, m=m, nu=nu, epochs=9,
                      eta_step=1.0 / (4.0 * (model.beta + nu)), seed=0)
    rep = dsvrg_run(cfg, make_shards(full, m), model, domain)
    gaps = [g for _, g in rep.extras["erm_subopt_by_epoch"]]
    assert len(gaps) == cfg.epochs + 1
    streak = best = 0
    for i in range(len(gaps) - 1):
        if gaps[i] > 0 and gaps[i + 1] <= gaps[i] / 2.0:
            streak += 1
            best = max(best, streak)
        else:
            streak = 0
    assert best >= 5
    DETAILS[10] = "longest >=2x-per-epoch streak: %d epochs (need 5); final gap %.1e" % (
        best, gaps[-1],
    )


def test_c11_acceleration_weight_convergence():
    t0 = time.monotonic()
    worst_tail = 0.0
    for q in (0.01, 0.1, 0.5):
        for a0 in (1.0, 0.02):
            a = a0
            dev_prev = abs(a - math.sqrt(q))
            for _ in range(200):
                a_next = catalyst_alpha_next(a, q)
                coeff = a * (1.0 - a) / (a_next + a * a)
                assert math.isfinite(coeff) and coeff >= 0.0
                dev = abs(a_next - math.sqrt(q))
                assert dev <= dev_prev + 1e-15
                a, dev_prev = a_next, dev
            assert dev_prev < 1e-8
            worst_tail = max(worst_tail, dev_prev)
    elapsed = time.monotonic() - t0
    assert elapsed < 1.0
    DETAILS[11] = "|alpha-sqrt(q)| after 200 steps <= %.1e, monotone throughout" % worst_tail


def test_c12_suite_rerun_byte_identical(tmp_path):
    out1, out2 = str(tmp_path / "first"), str(tmp_path / "second")
    assert suite_anyb(out1, seeds=range(3)) == 0
    assert suite_anyb(out2, seeds=range(3)) == 0
    compared = []
    for fname in ("runs.csv", "sweep.csv", "anyb.svg", "anyb_check.txt"):
        with open(os.path.join(out1, fname), "rb") as fh:
            b1 = fh.read()
        with open(os.path.join(out2, fname), "rb") as fh:
            b2 = fh.read()
        assert b1 == b2, "%s differs between reruns" % fname
        compared.append(fname)
    DETAILS[12] = "byte-identical reruns: %s" % ", ".join(compared)
