"""What the cluster simulator charges, and why the totals are predictable.

The simulator is a pure meter: algorithms keep their own arrays and report
counts.  Every collective is one round and one vector per machine; compute
between collectives is charged per O(d) pass and the *parallel* total takes
the max over machines inside each phase (a phase where only the designated
machine works is fully serialized).  Sample residency and predictor-vector
residency are tracked as high-water marks.  Verification work (oracle
solves, population suboptimality) never touches the meter.
"""

import numpy as np

from proxsim import (
    ClusterSim,
    DSVRGConfig,
    Domain,
    MPDANEConfig,
    SyntheticLSSource,
    SyntheticLSSpec,
    budget_from_model,
    dsvrg_nu,
    dsvrg_run,
    least_squares_model,
    make_shards,
    mp_dane_run,
    mp_dsvrg_params,
    mp_dsvrg_run,
)
from proxsim.cluster import LEDGER_CSV_HEADER

# --- hand-driven walkthrough -------------------------------------------------

print("a phase charges its slowest machine:")
sim = ClusterSim(3)
sim.charge(0, 10)
sim.charge(1, 4)
sim.charge(2, 4)
sim.all_average([np.ones(2), np.ones(2), np.ones(2)])   # closes the phase
sim.charge_all(5)
snap = sim.finish().snapshot()
print("  ops per machine %s, parallel elapsed %d, serial total %d, rounds %d"
      % (snap["vector_ops"], snap["ops_parallel"], snap["ops_total"], snap["rounds"]))
assert snap["ops_parallel"] == 10 + 5
assert snap["ops_total"] == 18 + 15
assert snap["rounds"] == 1

sim = ClusterSim(2)
sim.store_batch(0, 100)
sim.store_batch(0, 100)   # second batch resident at the same time
sim.release_batch(0, 200)
sim.store_batch(0, 50)
sim.touch_vectors(0, 6)
sim.touch_vectors(0, 2)
snap = sim.finish().snapshot()
print("  peaks are high-water marks: samples %d (not 50), vectors %d (not 2)"
      % (snap["peak_samples"], snap["peak_vectors"]))
assert snap["peak_samples"] == 200 and snap["peak_vectors"] == 6

# --- one ledger row per distributed solver -----------------------------------

rng = np.random.default_rng(5)
d, B = 6, 2.0
w_star = rng.standard_normal(d)
w_star *= 0.9 / np.linalg.norm(w_star)
source = SyntheticLSSource(SyntheticLSSpec(d=d, w_star=w_star, beta=1.0, sigma=0.1))
domain = Domain.unconstrained(B)
model = least_squares_model(beta=1.0, y_max=1.0, radius=B + 0.9 + 1.0)

print()
print(LEDGER_CSV_HEADER)

budget = budget_from_model(model, B, n_eps=2048)
cfg = mp_dsvrg_params(budget, b=32, m=4, seed=0)
rep_sv = mp_dsvrg_run(cfg, source, model, domain, certify=False)
print(rep_sv.extras["ledger_csv"])

dane = MPDANEConfig(b=32, m=4, T=8, gamma=2.0, kappa=0.0, R=1, K=6,
                    local_solver="exact_ls", alpha0=1.0, seed=0)
rep_da = mp_dane_run(dane, source, model, domain, certify=False)
print(rep_da.extras["ledger_csv"])

n, m = 2048, 4
full = source.draw(n, np.random.default_rng(np.random.SeedSequence((5, 2))))
nu = dsvrg_nu(model, B, n)
dcfg = DSVRGConfig(n=n, m=m, nu=nu, epochs=6,
                   eta_step=1.0 / (4.0 * (model.beta + nu)), seed=0)
rep_ds = dsvrg_run(dcfg, make_shards(full, m), model, domain, erm_oracle=False)
print(rep_ds.extras["ledger_csv"])

# --- the totals against their closed forms -----------------------------------

led = rep_sv.ledger
assert led["rounds"] == 2 * cfg.K * cfg.T
assert led["vectors_sent_per_machine"] == 2 * cfg.K * cfg.T
assert led["ops_parallel"] == cfg.K * cfg.T * (cfg.b + cfg.b // cfg.p)
assert led["peak_samples"] == cfg.b       # fresh draws are dropped every t

led = rep_da.ledger
assert led["rounds"] == 2 * dane.K * dane.R * dane.T
assert led["peak_samples"] == dane.b

led = rep_ds.ledger
assert led["rounds"] == 2 * dcfg.epochs   # anchor-gradient round + broadcast
assert led["peak_samples"] == n // m      # the shard never leaves its machine

print()
print("closed forms hold: 2KT=%d rounds (two-loop), 2KRT=%d (consensus), 2E=%d (sharded)"
      % (2 * cfg.K * cfg.T, 2 * dane.K * dane.R * dane.T, 2 * dcfg.epochs))

# Certification replays every inner solve against a dense oracle, off-meter.
rep_cert = mp_dsvrg_run(cfg, source, model, domain, certify=True)
assert rep_cert.ledger == rep_sv.ledger
print("certified rerun charges nothing extra: ledgers identical")
