"""Stochastic proximal-point optimization with a simulated cluster.

The package solves streaming convex problems by repeatedly minimizing the
loss on a fresh minibatch plus a quadratic pull toward the previous iterate,
and provides distributed inner solvers (variance-reduced sweeps, gradient-
corrected consensus steps with optional acceleration) whose communication
rounds, vector operations, and memory high-water marks are metered exactly
by a deterministic cluster simulator.
"""

from .cluster import ClusterSim, ResourceLedger
from .config import ConfigError, ExperimentConfig, parse_config
from .data import (
    DatasetSource,
    DatasetSpec,
    SyntheticLSSource,
    SyntheticLSSpec,
    draw_minibatch,
    holdout_objective,
    population_ls_objective,
    population_suboptimality_ls,
    read_csv,
    read_libsvm,
    write_libsvm,
)
from .dist_solvers import (
    DSVRGConfig,
    MPDANEConfig,
    MPDSVRGConfig,
    ProblemBudget,
    budget_from_model,
    catalyst_alpha_next,
    catalyst_extrapolate,
    dane_inner_step,
    dsvrg_nu,
    dsvrg_run,
    emso_run,
    emso_step,
    make_shards,
    minibatch_sgd_gamma,
    minibatch_sgd_run,
    minibatch_sgd_step,
    mp_dane_params,
    mp_dane_run,
    mp_dsvrg_params,
    mp_dsvrg_run,
    svrg_inner_pass,
)
from .losses import (
    Domain,
    LossModel,
    Minibatch,
    Sample,
    batch_grad,
    batch_value,
    least_squares_model,
    logistic_model,
    loss_grad,
    loss_value,
    ls_composite_prox_solve,
    ls_erm_solve,
    project,
    prox_fixed_point_residual,
    prox_objective,
    prox_solve,
    sample_grad,
    sample_grads,
)
from .metrics import (
    RunReport,
    SweepResult,
    fit_rate_slope,
    inner_gap_oracle,
    stability_bound_check,
)
from .plots import PlotSeries, emit_plot, render_loglog
from .prox_core import (
    ProxSchedule,
    STRONGLY_CONVEX,
    WEAKLY_CONVEX,
    averaging_weight,
    eta_tolerance,
    exact_inner,
    exact_prox_step,
    gamma_at,
    inexact_prox_step,
    make_gd_inner,
    prox_descent_residual,
    run_minibatch_prox,
    strongly_convex_schedule,
    weakly_convex_schedule,
)
from .suites import (
    RUNS_CSV_COLUMNS,
    SUITES,
    aggregate,
    build_instance,
    expand_descriptors,
    planted_w_star,
    run_descriptors,
    run_experiment,
    run_suite_config,
    seed_offset,
    write_runs_csv,
    write_sweep_csv,
)

__version__ = "0.1.0"
