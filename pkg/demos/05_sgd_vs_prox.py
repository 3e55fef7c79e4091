"""Fixed sample budget, growing batches: where the linearized method stalls.

Both methods take T = n/b steps on fresh b-sample draws, so every column of
the table spends exactly n samples.  The proximal step solves the batch
subproblem; the linearized step only takes one gradient.  Its tuned stepsize
carries an extra additive smoothness term, so once b is large enough that
the sqrt(T/b) part stops dominating, the effective stepsize is too small for
the few steps that remain and the error degrades.  The proximal column keeps
its accuracy across the whole sweep (flatness factor ~1), which is what
makes large batches -- i.e. more machines -- actually useful.
"""

import numpy as np

from proxsim import (
    Domain,
    PlotSeries,
    SyntheticLSSource,
    SyntheticLSSpec,
    least_squares_model,
    minibatch_sgd_gamma,
    minibatch_sgd_run,
    population_suboptimality_ls,
    render_loglog,
    run_minibatch_prox,
    weakly_convex_schedule,
)

rng = np.random.default_rng(2)
d, B = 4, 1.0
w_star = rng.standard_normal(d)
w_star /= np.linalg.norm(w_star)
spec = SyntheticLSSpec(d=d, w_star=w_star, beta=1.0, sigma=0.1)
source = SyntheticLSSource(spec)
domain = Domain.ball(B)
model = least_squares_model(beta=1.0, y_max=1.0 + 0.1, radius=B)
evaluate = lambda w: population_suboptimality_ls(spec, w)

n = 8192
batches = [1, 8, 64, 512]
seeds = range(12)

print("budget n = %d, batch sweep, mean population suboptimality over %d seeds"
      % (n, len(seeds)))
print("%8s %8s %12s %12s" % ("b", "T", "prox", "sgd"))
prox_means, prox_ses, sgd_means, sgd_ses = [], [], [], []
for b in batches:
    T = n // b
    sched = weakly_convex_schedule(T, b, model.L, D0=B)
    pr = [run_minibatch_prox(model, domain, source, sched, seed=s,
                             check_descent=False, evaluate=evaluate).final_subopt
          for s in seeds]
    gamma = minibatch_sgd_gamma(model, T, b, D0=B)
    sg = [minibatch_sgd_run(model, domain, source, T, b, gamma, seed=s,
                            evaluate=evaluate).final_subopt
          for s in seeds]
    prox_means.append(np.mean(pr))
    prox_ses.append(np.std(pr, ddof=1) / np.sqrt(len(pr)))
    sgd_means.append(np.mean(sg))
    sgd_ses.append(np.std(sg, ddof=1) / np.sqrt(len(sg)))
    print("%8d %8d %12.3e %12.3e" % (b, T, prox_means[-1], sgd_means[-1]))

flat = max(prox_means) / min(prox_means)
degr = sgd_means[-1] / sgd_means[0]
print()
print("prox flatness across the sweep: %.2fx" % flat)
print("sgd degradation b=%d vs b=1:    %.2fx" % (batches[-1], degr))
assert flat < 2.0
assert degr > 2.0

svg = render_loglog(
    [PlotSeries("minibatch-prox", batches, prox_means, prox_ses),
     PlotSeries("minibatch-sgd", batches, sgd_means, sgd_ses)],
    title="fixed budget n=%d" % n, xlabel="batch size b", ylabel="suboptimality",
)
with open("sgd_vs_prox.svg", "w") as fh:
    fh.write(svg)
print("wrote sgd_vs_prox.svg")
