"""Minibatch proximal point in its basic single-machine form.

Each iteration draws a fresh minibatch I and moves to the minimizer of

    phi_I(w) + (gamma_t / 2) ||w - w_{t-1}||^2,

i.e. the batch loss is solved *implicitly* instead of being linearized.
The script runs the two stepsize schedules, checks the advertised decay of
the population suboptimality against the budget, and then repeats a run
with an iterative inner solver to show the inexactness certificates.
"""

import math

import numpy as np

from proxsim import (
    Domain,
    SyntheticLSSource,
    SyntheticLSSpec,
    least_squares_model,
    make_gd_inner,
    population_suboptimality_ls,
    run_minibatch_prox,
    strongly_convex_schedule,
    weakly_convex_schedule,
)

rng = np.random.default_rng(7)
d, sigma, B = 8, 0.1, 1.0
w_star = rng.standard_normal(d)
w_star *= 0.9 / np.linalg.norm(w_star)
spec = SyntheticLSSpec(d=d, w_star=w_star, beta=1.0, sigma=sigma)
source = SyntheticLSSource(spec)
domain = Domain.ball(B)
model = least_squares_model(beta=1.0, y_max=0.9 + sigma, radius=B)

print("population suboptimality of the averaged iterate, constant schedule")
print("%8s %8s %12s %14s" % ("bT", "T (b=8)", "gamma", "subopt"))
b = 8
for bT in (256, 1024, 4096):
    T = bT // b
    sched = weakly_convex_schedule(T, b, model.L, D0=B)
    rep = run_minibatch_prox(
        model, domain, source, sched, seed=0,
        evaluate=lambda w: population_suboptimality_ls(spec, w),
    )
    print("%8d %8d %12.4f %14.6f" % (bT, T, sched.gamma_const, rep.final_subopt))
print("quadrupling the budget should roughly halve the gap (1/sqrt(bT) rate)")

print()
print("with a ridge term the ramp gamma_t = lam (t-1)/2 gives the faster rate")
lam = 0.5
model_r = least_squares_model(beta=1.0, y_max=0.9 + sigma, radius=2.0, lam=lam)
dom_r = Domain.unconstrained(B)
for bT in (256, 1024, 4096):
    T = bT // b
    sched = strongly_convex_schedule(T, b, model_r.L, lam, D0=B)
    rep = run_minibatch_prox(
        model_r, dom_r, source, sched, seed=0,
        evaluate=lambda w: population_suboptimality_ls(spec, w, lam=lam),
    )
    print("%8d %8d %12s %14.6g" % (bT, T, "ramp", rep.final_subopt))

print()
print("every exact step also satisfies a per-iteration distance-descent")
print("inequality against a random reference point; the logged slack is")
sched = weakly_convex_schedule(128, b, model.L, D0=B)
rep = run_minibatch_prox(model, domain, source, sched, seed=1)
res = rep.invariant_log["prox_descent"]
print("  min over t of residual/scale = %.3g  (>= -1e-7 is the hard check)" % min(res))
assert min(res) >= -1e-7

print()
print("the same loop with an inner gradient solver certified to tolerance eta_t:")
sched = weakly_convex_schedule(64, b, model.L, D0=B)
rep = run_minibatch_prox(
    model, domain, source, sched, seed=2, exact=False, inner=make_gd_inner(),
)
worst = max(g / e for g, e in zip(rep.achieved_gaps, rep.etas))
print("  worst achieved_gap / eta_t over %d steps = %.3g (must stay <= 1)" % (sched.T, worst))
assert worst <= 1.0
print("done.")
