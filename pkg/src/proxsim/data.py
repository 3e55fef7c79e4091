"""Data sources: synthetic least-squares streams and fixed dataset files.

The synthetic source draws features uniformly from the sphere of radius
sqrt(beta), so ||x||^2 = beta holds exactly sample by sample and the
population second-moment matrix is (beta/d)*I.  That closed form is what
makes population suboptimality an exact oracle instead of a Monte Carlo
estimate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .losses import LossModel, Minibatch, batch_value


@dataclass(frozen=True)
class SyntheticLSSpec:
    """Planted linear model: y = w_star'x + Uniform[-sigma, sigma] noise."""

    d: int
    w_star: np.ndarray
    beta: float = 1.0
    sigma: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "w_star", np.asarray(self.w_star, dtype=float))
        if self.d <= 0:
            raise ValueError("d must be positive")
        if self.w_star.shape != (self.d,):
            raise ValueError("w_star must have shape (%d,)" % self.d)
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")


class SyntheticLSSource:
    """Stream of fresh i.i.d. samples from a SyntheticLSSpec.

    The source is stateless with respect to randomness: every draw takes an
    explicit numpy Generator, so identical generator states give identical
    batches and per-machine streams stay independent.
    """

    def __init__(self, spec: SyntheticLSSpec):
        self.spec = spec

    @property
    def dim(self) -> int:
        return self.spec.d

    def draw(self, b: int, rng: np.random.Generator) -> Minibatch:
        if b <= 0:
            raise ValueError("batch size must be positive")
        spec = self.spec
        g = rng.standard_normal((b, spec.d))
        norms = np.linalg.norm(g, axis=1, keepdims=True)
        X = np.sqrt(spec.beta) * g / norms
        y = X @ spec.w_star
        if spec.sigma > 0:
            y = y + rng.uniform(-spec.sigma, spec.sigma, size=b)
        return Minibatch(X, y)


def draw_minibatch(source, b: int, rng: np.random.Generator) -> Minibatch:
    return source.draw(b, rng)


def population_ls_objective(spec: SyntheticLSSpec, w: np.ndarray, lam: float = 0.0) -> float:
    """Exact E[0.5 (w'x - y)^2] + (lam/2)||w||^2 under the synthetic law.

    E[xx'] = (beta/d) I on the sphere and the label noise is independent with
    variance sigma^2/3, so the expectation is a closed-form quadratic.
    """
    w = np.asarray(w, dtype=float)
    sigma0 = spec.beta / spec.d
    diff = w - spec.w_star
    val = 0.5 * sigma0 * float(diff @ diff) + spec.sigma**2 / 6.0
    if lam > 0:
        val += 0.5 * lam * float(w @ w)
    return val


def population_suboptimality_ls(spec: SyntheticLSSpec, w: np.ndarray, lam: float = 0.0) -> float:
    """Population objective gap at w, against the population minimizer.

    With lam=0 the minimizer is w_star itself and the gap is
    0.5*(beta/d)*||w - w_star||^2.  With a ridge the minimizer shrinks to
    sigma0/(sigma0+lam)*w_star and the Hessian stiffens accordingly; both
    cases are exact quadratics, no sampling involved.
    """
    w = np.asarray(w, dtype=float)
    sigma0 = spec.beta / spec.d
    if lam <= 0:
        diff = w - spec.w_star
        return 0.5 * sigma0 * float(diff @ diff)
    w_opt = (sigma0 / (sigma0 + lam)) * spec.w_star
    diff = w - w_opt
    return 0.5 * (sigma0 + lam) * float(diff @ diff)


@dataclass(frozen=True)
class DatasetSpec:
    """A fixed dataset file: path, format ('libsvm' or 'csv'), loss kind, split seed."""

    path: str
    format: str
    loss: str
    split_seed: int = 0

    def __post_init__(self):
        if self.format not in ("libsvm", "csv"):
            raise ValueError("unknown dataset format %r" % (self.format,))
        if self.loss not in ("least_squares", "logistic"):
            raise ValueError("unknown loss %r" % (self.loss,))


def _map_logistic_labels(y: np.ndarray) -> np.ndarray:
    values = np.unique(y)
    if values.size == 2 and set(values.tolist()) == {-1.0, 1.0}:
        return y
    if values.size == 2:
        lo, hi = values
        return np.where(y == lo, -1.0, 1.0)
    raise ValueError(
        "logistic losses need two label values, found %d distinct" % values.size
    )


class DatasetSource:
    """Uniform-with-replacement sampler over the training half of a dataset.

    Rows are split half/half into train and holdout by a permutation seeded
    with spec.split_seed; holdout_objective evaluates on the held-out half.
    """

    def __init__(self, spec: DatasetSpec, X: np.ndarray, y: np.ndarray):
        self.spec = spec
        if spec.loss == "logistic":
            y = _map_logistic_labels(np.asarray(y, dtype=float))
        self.X = np.asarray(X, dtype=float)
        self.y = np.asarray(y, dtype=float)
        n = self.X.shape[0]
        if n < 2:
            raise ValueError("dataset needs at least 2 rows to split")
        perm = np.random.default_rng(spec.split_seed).permutation(n)
        half = n // 2
        self.train_idx = perm[:half]
        self.eval_idx = perm[half:]

    @classmethod
    def load(cls, spec: DatasetSpec, has_header: bool = False) -> "DatasetSource":
        if spec.format == "libsvm":
            X, y = read_libsvm(spec.path)
        else:
            X, y = read_csv(spec.path, has_header=has_header)
        return cls(spec, X, y)

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    @property
    def n_train(self) -> int:
        return self.train_idx.size

    def draw(self, b: int, rng: np.random.Generator) -> Minibatch:
        if b <= 0:
            raise ValueError("batch size must be positive")
        idx = self.train_idx[rng.integers(0, self.train_idx.size, size=b)]
        return Minibatch(self.X[idx], self.y[idx])

    def train_batch(self) -> Minibatch:
        """The whole training half as one batch (for ERM-style baselines)."""
        return Minibatch(self.X[self.train_idx], self.y[self.train_idx])

    def feature_norm_sq_max(self) -> float:
        return float(np.max(np.sum(self.X * self.X, axis=1)))


def holdout_objective(source: DatasetSource, model: LossModel, w: np.ndarray) -> float:
    """Mean loss of w over the held-out half."""
    batch = Minibatch(source.X[source.eval_idx], source.y[source.eval_idx])
    return batch_value(model, w, batch)


def read_libsvm(path: str):
    """Parse a sparse 'label idx:val ...' file into dense arrays (X, y).

    Indices are 1-based; the dimension is the largest index seen.  Malformed
    input raises ValueError naming the offending line number.
    """
    labels = []
    rows = []
    max_idx = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            try:
                label = float(parts[0])
            except ValueError:
                raise ValueError("line %d: bad label %r" % (lineno, parts[0])) from None
            entries = {}
            for token in parts[1:]:
                if ":" not in token:
                    raise ValueError("line %d: expected idx:val, got %r" % (lineno, token))
                idx_s, val_s = token.split(":", 1)
                try:
                    idx = int(idx_s)
                    val = float(val_s)
                except ValueError:
                    raise ValueError("line %d: bad entry %r" % (lineno, token)) from None
                if idx < 1:
                    raise ValueError("line %d: indices are 1-based, got %d" % (lineno, idx))
                entries[idx] = val
                max_idx = max(max_idx, idx)
            labels.append(label)
            rows.append(entries)
    if not rows:
        raise ValueError("no samples in %s" % path)
    X = np.zeros((len(rows), max_idx))
    for i, entries in enumerate(rows):
        for idx, val in entries.items():
            X[i, idx - 1] = val
    return X, np.asarray(labels, dtype=float)


def write_libsvm(path: str, X: np.ndarray, y: np.ndarray) -> None:
    """Inverse of read_libsvm; zero entries are omitted as usual."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(X.shape[0]):
            tokens = [format(y[i], ".17g")]
            for j in range(X.shape[1]):
                if X[i, j] != 0.0:
                    tokens.append("%d:%s" % (j + 1, format(X[i, j], ".17g")))
            fh.write(" ".join(tokens) + "\n")


def read_csv(path: str, has_header: bool = False):
    """Dense numeric CSV; the last column is the label."""
    skip = 1 if has_header else 0
    try:
        M = np.loadtxt(path, delimiter=",", skiprows=skip, ndmin=2)
    except ValueError as exc:
        raise ValueError("failed to parse %s as numeric CSV: %s" % (path, exc)) from None
    if M.shape[1] < 2:
        raise ValueError("CSV needs at least one feature column plus a label column")
    return M[:, :-1], M[:, -1]
