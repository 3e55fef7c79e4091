"""Experiment config files: flat INI text, one assignment per line.

A config names one algorithm, one problem, one sample budget, and optionally
a sweep axis; per-algorithm sections override solver knobs.  Parsing is
strict -- unknown sections or keys and out-of-range values fail with the
exact field path (e.g. ``[problem].sigma``) so a typo never silently runs
the wrong experiment.  docs/schemas.md documents every key.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

ALGOS = ("exact_prox", "inexact_prox", "mp_dsvrg", "mp_dane", "minibatch_sgd", "dsvrg", "emso")
SCHEDULES = ("weakly_convex_const", "strongly_convex_ramp")
SWEEP_AXES = ("bT", "b", "K")
PROBLEM_KINDS = ("synthetic_ls", "dataset")
DOMAIN_KINDS = ("unconstrained", "ball")
DATASET_FORMATS = ("libsvm", "csv")


class ConfigError(ValueError):
    """Schema violation; ``path`` is the offending "[section].key"."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__("%s: %s" % (path, message))


@dataclass
class ExperimentConfig:
    """Everything one `proxsim run` needs, already validated and typed."""

    name: str
    algo: str
    seeds: list
    output_dir: str | None = None
    # problem
    problem_kind: str = "synthetic_ls"
    d: int = 10
    beta: float = 1.0
    sigma: float = 0.1
    w_star_norm: float = 0.9
    w_star_seed: int = 0
    lam: float = 0.0
    domain_kind: str = "unconstrained"
    B: float = 2.0
    dataset_path: str | None = None
    dataset_format: str = "libsvm"
    # budget
    n_eps: int = 4096
    eps: float | None = None
    # run shape
    b: int = 16
    m: int = 4
    schedule: str = "weakly_convex_const"
    # sweep
    sweep_axis: str | None = None
    sweep_values: list = field(default_factory=list)
    # per-algo overrides, e.g. {"mp_dsvrg": {"eta_step": 0.25}}
    overrides: dict = field(default_factory=dict)


_OVERRIDE_KEYS = {
    "mp_dsvrg": {"eta_step": float, "k_multiplier": float, "literal_z_divisor": bool},
    "mp_dane": {"local_solver": str, "theta": float, "c1": float, "c2": float, "delta": float},
    "inexact_prox": {"c1": float, "c2": float, "delta": float, "max_iters": int},
    "exact_prox": {},
    "minibatch_sgd": {"gamma": float},
    "dsvrg": {"epochs": int, "eta_step": float, "nu": float},
    "emso": {"gamma": float},
}

_KNOWN_SECTIONS = ("experiment", "problem", "budget", "run", "sweep") + tuple(_OVERRIDE_KEYS)


class _Section:
    """One INI section with typed, path-reporting accessors that track
    which keys were consumed (leftovers are schema errors)."""

    def __init__(self, name: str, items: dict):
        self.name = name
        self.items = dict(items)
        self.seen = set()

    def _raw(self, key):
        self.seen.add(key)
        return self.items.get(key)

    def path(self, key):
        return "[%s].%s" % (self.name, key)

    def get_str(self, key, default=None, choices=None, required=False):
        raw = self._raw(key)
        if raw is None:
            if required:
                raise ConfigError(self.path(key), "required key is missing")
            return default
        val = raw.strip()
        if choices is not None and val not in choices:
            raise ConfigError(self.path(key), "must be one of %s, got %r" % ("/".join(choices), val))
        return val

    def get_int(self, key, default=None, minimum=None):
        raw = self._raw(key)
        if raw is None:
            return default
        try:
            val = int(raw.strip())
        except ValueError:
            raise ConfigError(self.path(key), "expected an integer, got %r" % raw) from None
        if minimum is not None and val < minimum:
            raise ConfigError(self.path(key), "must be >= %d" % minimum)
        return val

    def get_float(self, key, default=None, minimum=None, strict_min=None):
        raw = self._raw(key)
        if raw is None:
            return default
        try:
            val = float(raw.strip())
        except ValueError:
            raise ConfigError(self.path(key), "expected a number, got %r" % raw) from None
        if minimum is not None and val < minimum:
            raise ConfigError(self.path(key), "must be >= %g" % minimum)
        if strict_min is not None and val <= strict_min:
            raise ConfigError(self.path(key), "must be > %g" % strict_min)
        return val

    def get_bool(self, key, default=None):
        raw = self._raw(key)
        if raw is None:
            return default
        val = raw.strip().lower()
        if val in ("1", "true", "yes", "on"):
            return True
        if val in ("0", "false", "no", "off"):
            return False
        raise ConfigError(self.path(key), "expected a boolean, got %r" % raw)

    def get_number_list(self, key, kind=float, required=False):
        raw = self._raw(key)
        if raw is None:
            if required:
                raise ConfigError(self.path(key), "required key is missing")
            return []
        parts = raw.replace(",", " ").split()
        if not parts:
            raise ConfigError(self.path(key), "list must not be empty")
        out = []
        for p in parts:
            try:
                out.append(kind(p))
            except ValueError:
                raise ConfigError(self.path(key), "bad list entry %r" % p) from None
        return out

    def check_consumed(self):
        extra = sorted(set(self.items) - self.seen)
        if extra:
            raise ConfigError(self.path(extra[0]), "unknown key")


def parse_config(path: str) -> ExperimentConfig:
    """Read and validate one experiment config file."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keep key case: B and b are different knobs
    read = parser.read(path)
    if not read:
        raise ConfigError("[file]", "cannot read config at %r" % path)

    for sec in parser.sections():
        if sec not in _KNOWN_SECTIONS:
            raise ConfigError("[%s]" % sec, "unknown section")

    def section(name):
        return _Section(name, dict(parser[name]) if parser.has_section(name) else {})

    exp = section("experiment")
    algo = exp.get_str("algo", choices=ALGOS, required=True)
    name = exp.get_str("name", default=algo)
    seeds = exp.get_number_list("seeds", kind=int, required=True)
    if any(s < 0 for s in seeds):
        raise ConfigError("[experiment].seeds", "seeds must be nonnegative")
    output_dir = exp.get_str("output_dir")
    exp.check_consumed()

    prob = section("problem")
    kind = prob.get_str("kind", default="synthetic_ls", choices=PROBLEM_KINDS)
    cfg = ExperimentConfig(
        name=name,
        algo=algo,
        seeds=seeds,
        output_dir=output_dir,
        problem_kind=kind,
        d=prob.get_int("d", default=10, minimum=1),
        beta=prob.get_float("beta", default=1.0, strict_min=0.0),
        sigma=prob.get_float("sigma", default=0.1, minimum=0.0),
        w_star_norm=prob.get_float("w_star_norm", default=0.9, minimum=0.0),
        w_star_seed=prob.get_int("w_star_seed", default=0, minimum=0),
        lam=prob.get_float("lam", default=0.0, minimum=0.0),
        domain_kind=prob.get_str("domain", default="unconstrained", choices=DOMAIN_KINDS),
        B=prob.get_float("B", default=2.0, strict_min=0.0),
        dataset_path=prob.get_str("path"),
        dataset_format=prob.get_str("format", default="libsvm", choices=DATASET_FORMATS),
    )
    if kind == "dataset" and not cfg.dataset_path:
        raise ConfigError("[problem].path", "dataset problems need a path")
    prob.check_consumed()

    bud = section("budget")
    cfg.n_eps = bud.get_int("n_eps", default=4096, minimum=1)
    cfg.eps = bud.get_float("eps", default=None, strict_min=0.0)
    bud.check_consumed()

    run = section("run")
    cfg.b = run.get_int("b", default=16, minimum=1)
    cfg.m = run.get_int("m", default=4, minimum=1)
    cfg.schedule = run.get_str("schedule", default="weakly_convex_const", choices=SCHEDULES)
    run.check_consumed()
    if cfg.schedule == "strongly_convex_ramp" and cfg.lam <= 0:
        raise ConfigError("[run].schedule", "the ramp schedule needs [problem].lam > 0")

    if parser.has_section("sweep"):
        sw = section("sweep")
        cfg.sweep_axis = sw.get_str("axis", choices=SWEEP_AXES, required=True)
        cfg.sweep_values = sw.get_number_list("values", kind=int, required=True)
        if any(v <= 0 for v in cfg.sweep_values):
            raise ConfigError("[sweep].values", "sweep values must be positive")
        sw.check_consumed()

    for algo_name, keys in _OVERRIDE_KEYS.items():
        if not parser.has_section(algo_name):
            continue
        sec = section(algo_name)
        got = {}
        for key, typ in keys.items():
            if typ is float:
                val = sec.get_float(key)
            elif typ is int:
                val = sec.get_int(key)
            elif typ is bool:
                val = sec.get_bool(key)
            else:
                val = sec.get_str(key)
            if val is not None:
                got[key] = val
        sec.check_consumed()
        if got:
            cfg.overrides[algo_name] = got

    if "mp_dane" in cfg.overrides:
        solver = cfg.overrides["mp_dane"].get("local_solver")
        if solver is not None:
            from .dist_solvers import LOCAL_SOLVERS

            if solver not in LOCAL_SOLVERS:
                raise ConfigError(
                    "[mp_dane].local_solver", "must be one of %s" % "/".join(LOCAL_SOLVERS)
                )
        theta = cfg.overrides["mp_dane"].get("theta")
        if theta is not None and not (0.0 < theta < 1.0):
            raise ConfigError("[mp_dane].theta", "must lie in (0, 1)")

    return cfg
