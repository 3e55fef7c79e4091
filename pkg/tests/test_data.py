"""Synthetic sample streams, population formulas, and dataset file loaders."""

import math

import numpy as np
import pytest

from proxsim import (
    DatasetSource,
    DatasetSpec,
    Minibatch,
    SyntheticLSSource,
    SyntheticLSSpec,
    holdout_objective,
    least_squares_model,
    population_suboptimality_ls,
    read_csv,
    read_libsvm,
    write_libsvm,
)
from proxsim.data import population_ls_objective


def _spec(d=5, beta=2.0, sigma=0.2, seed=0, norm=1.0):
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(d)
    w *= norm / np.linalg.norm(w)
    return SyntheticLSSpec(d=d, w_star=w, beta=beta, sigma=sigma)


def test_spec_validation():
    with pytest.raises(ValueError):
        SyntheticLSSpec(d=3, w_star=np.zeros(2))
    with pytest.raises(ValueError):
        SyntheticLSSpec(d=2, w_star=np.zeros(2), beta=0.0)
    with pytest.raises(ValueError):
        SyntheticLSSpec(d=2, w_star=np.zeros(2), sigma=-0.1)


def test_draw_geometry_and_labels():
    spec = _spec(beta=2.0, sigma=0.0)
    src = SyntheticLSSource(spec)
    I = src.draw(64, np.random.default_rng(1))
    assert I.b == 64 and I.d == 5
    # features live on the sphere of radius sqrt(beta)
    assert np.allclose(np.linalg.norm(I.X, axis=1), math.sqrt(2.0), atol=1e-12)
    # noiseless labels are exact inner products
    assert np.allclose(I.y, I.X @ spec.w_star, atol=1e-12)


def test_draw_noise_stays_within_sigma():
    spec = _spec(sigma=0.3)
    src = SyntheticLSSource(spec)
    I = src.draw(500, np.random.default_rng(2))
    noise = I.y - I.X @ spec.w_star
    assert np.all(np.abs(noise) <= 0.3 + 1e-12)
    assert np.std(noise) > 0.05  # actually random, not all zero


def test_draw_is_deterministic_in_the_generator_state():
    src = SyntheticLSSource(_spec())
    a = src.draw(8, np.random.default_rng(42))
    b = src.draw(8, np.random.default_rng(42))
    assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)


def test_population_objective_matches_monte_carlo():
    spec = _spec(d=4, beta=1.5, sigma=0.25, seed=3)
    src = SyntheticLSSource(spec)
    w = np.array([0.3, -0.2, 0.5, 0.1])
    I = src.draw(400_000, np.random.default_rng(4))
    emp = float(np.mean(0.5 * (I.X @ w - I.y) ** 2))
    pop = population_ls_objective(spec, w)
    # MC error at 4e5 samples is ~1e-3 at this scale
    assert abs(emp - pop) < 5e-3


def test_population_suboptimality_zero_at_the_minimizer():
    spec = _spec(seed=5)
    assert population_suboptimality_ls(spec, spec.w_star) == 0.0
    shifted = spec.w_star + 0.1
    assert population_suboptimality_ls(spec, shifted) > 0.0


def test_population_suboptimality_with_ridge_shrinks_the_minimizer():
    spec = _spec(d=4, beta=2.0, sigma=0.1, seed=6)
    lam = 0.5
    sigma0 = spec.beta / spec.d
    w_opt = sigma0 / (sigma0 + lam) * spec.w_star
    assert population_suboptimality_ls(spec, w_opt, lam=lam) < 1e-15
    # and the gap is the exact quadratic around it
    w = w_opt + np.array([0.1, 0.0, -0.1, 0.2])
    expected = 0.5 * (sigma0 + lam) * float(np.sum((w - w_opt) ** 2))
    assert abs(population_suboptimality_ls(spec, w, lam=lam) - expected) < 1e-12
    # consistency with the full objective difference
    direct = population_ls_objective(spec, w, lam=lam) - population_ls_objective(
        spec, w_opt, lam=lam
    )
    assert abs(population_suboptimality_ls(spec, w, lam=lam) - direct) < 1e-12


# ------------------------------------------------------------ file formats


def test_libsvm_round_trip(tmp_path):
    rng = np.random.default_rng(7)
    X = rng.standard_normal((20, 6))
    X[3, 2] = 0.0  # zero entries are dropped on write and must come back as 0
    y = rng.standard_normal(20)
    path = str(tmp_path / "t.libsvm")
    write_libsvm(path, X, y)
    X2, y2 = read_libsvm(path)
    assert X2.shape == (20, 6)
    assert np.allclose(X2, X, atol=1e-12)
    assert np.allclose(y2, y, atol=1e-12)


def test_libsvm_indices_are_one_based(tmp_path):
    path = str(tmp_path / "t.libsvm")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("1.5 1:2.0 3:4.0\n-0.5 2:1.0\n")
    X, y = read_libsvm(path)
    assert X.shape == (2, 3)
    assert np.allclose(X[0], [2.0, 0.0, 4.0])
    assert np.allclose(X[1], [0.0, 1.0, 0.0])
    assert np.allclose(y, [1.5, -0.5])


def test_csv_reader_with_and_without_header(tmp_path):
    path = str(tmp_path / "t.csv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("a,b,label\n1.0,2.0,3.0\n4.0,5.0,6.0\n")
    X, y = read_csv(path, has_header=True)
    assert X.shape == (2, 2)
    assert np.allclose(y, [3.0, 6.0])
    path2 = str(tmp_path / "t2.csv")
    with open(path2, "w", encoding="utf-8") as fh:
        fh.write("1.0,2.0,3.0\n4.0,5.0,6.0\n")
    X2, y2 = read_csv(path2)
    assert np.allclose(X, X2) and np.allclose(y, y2)


def test_dataset_source_split_and_holdout(tmp_path):
    rng = np.random.default_rng(8)
    X = rng.standard_normal((40, 3))
    y = X @ np.array([1.0, -0.5, 0.25]) + 0.01 * rng.standard_normal(40)
    path = str(tmp_path / "d.libsvm")
    write_libsvm(path, X, y)
    src = DatasetSource.load(DatasetSpec(path=path, format="libsvm", loss="least_squares"))
    assert src.dim == 3
    # halves, disjoint, covering
    assert len(src.train_idx) + len(src.eval_idx) == 40
    assert set(src.train_idx).isdisjoint(set(src.eval_idx))
    # draws come from the training half only
    I = src.draw(200, np.random.default_rng(9))
    train_rows = {tuple(r) for r in X[src.train_idx]}
    assert all(tuple(r) in train_rows for r in I.X)
    # holdout objective is the mean loss over the eval half
    model = least_squares_model(beta=src.feature_norm_sq_max(), y_max=float(np.abs(y).max()), radius=3.0)
    w = np.array([1.0, -0.5, 0.25])
    manual = float(np.mean(0.5 * (X[src.eval_idx] @ w - y[src.eval_idx]) ** 2))
    assert abs(holdout_objective(src, model, w) - manual) < 1e-12


def test_logistic_label_mapping(tmp_path):
    path = str(tmp_path / "lg.csv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("0.5,0\n-0.5,1\n0.25,0\n-0.25,1\n")
    src = DatasetSource.load(DatasetSpec(path=path, format="csv", loss="logistic"))
    assert set(np.unique(src.y)) == {-1.0, 1.0}
    path2 = str(tmp_path / "bad.csv")
    with open(path2, "w", encoding="utf-8") as fh:
        fh.write("0.5,0\n-0.5,1\n0.25,2\n")
    with pytest.raises(ValueError):
        DatasetSource.load(DatasetSpec(path=path2, format="csv", loss="logistic"))
