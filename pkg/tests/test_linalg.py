import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from torrent.exceptions import DimensionMismatch, SingularSystem
from torrent.linalg import residuals, solve_least_squares, spectral_norm_estimate


def test_lstsq_orthonormal_columns():
    theta = solve_least_squares(np.eye(2), [3.0, -4.0])
    np.testing.assert_allclose(theta, [3.0, -4.0], atol=1e-14)


def test_lstsq_constant_fit():
    theta = solve_least_squares(np.array([[1.0, 1.0, 1.0]]), [2.0, 2.0, 2.0])
    np.testing.assert_allclose(theta, [2.0])


def test_lstsq_matches_grid_search():
    X, y = np.array([[1.0, 2.0]]), np.array([1.0, 1.0])
    grid = np.arange(-2.0, 2.0 + 1e-12, 1e-4)
    loss = ((y[None, :] - grid[:, None] * X[0][None, :]) ** 2).sum(axis=1)
    oracle = grid[np.argmin(loss)]
    theta = solve_least_squares(X, y)
    assert abs(theta[0] - oracle) <= 1e-4
    assert theta[0] == pytest.approx(0.6, abs=1e-12)


def test_lstsq_rank_deficient_falls_back():
    # two identical features: any split of the weight is optimal
    X = np.array([[1.0, 2.0, 3.0], [1.0, 2.0, 3.0]])
    y = np.array([2.0, 4.0, 6.0])
    theta = solve_least_squares(X, y)
    assert np.all(np.isfinite(theta))
    np.testing.assert_allclose(X.T @ theta, y, atol=1e-6)


def test_lstsq_non_finite_raises():
    with pytest.raises(SingularSystem):
        solve_least_squares(np.array([[1.0, np.nan]]), [1.0, 2.0])


def test_lstsq_length_mismatch():
    with pytest.raises(DimensionMismatch):
        solve_least_squares(np.eye(2), [1.0, 2.0, 3.0])


@pytest.mark.parametrize("seed", range(20))
def test_lstsq_normal_equation_stationarity(seed):
    rng = np.random.default_rng(seed)
    p, m = rng.integers(1, 8), rng.integers(10, 60)
    X = rng.standard_normal((p, m))
    y = rng.standard_normal(m)
    theta = solve_least_squares(X, y)
    r = y - X.T @ theta
    bound = 1e-8 * np.linalg.norm(X, 2) * np.linalg.norm(y)
    assert np.max(np.abs(X @ r)) <= bound


def test_spectral_norm_rank_one():
    assert spectral_norm_estimate(np.array([[3.0], [4.0]])) == pytest.approx(25.0, rel=0.01)


def test_spectral_norm_identity():
    assert spectral_norm_estimate(np.eye(2)) == pytest.approx(1.0, rel=0.01)


def test_spectral_norm_matches_eigensolver():
    X = np.random.default_rng(3).standard_normal((3, 5))
    exact = np.linalg.eigvalsh(X @ X.T)[-1]
    est = spectral_norm_estimate(X)
    assert 0.99 * exact <= est <= exact * (1 + 1e-12)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 12)),
              elements=st.floats(-10, 10, allow_nan=False, allow_infinity=False)))
def test_spectral_norm_bounds(X):
    est = spectral_norm_estimate(X)
    trace = float(np.sum(X * X))
    col_max = float(np.max(np.sum(X * X, axis=0)))
    assert est <= trace * (1 + 1e-9) + 1e-12
    assert est >= col_max * (1 - 1e-9)
    exact = np.linalg.eigvalsh(X @ X.T)[-1]
    assert est >= 0.99 * exact - 1e-9


def test_residuals_examples():
    y = np.array([2.0, 2.0, 2.0])
    X = np.array([[1.0, 2.0, 3.0]])
    np.testing.assert_allclose(residuals(X, y, np.zeros(1)), y)
    np.testing.assert_allclose(residuals(X, y, [1.0]), [1.0, 0.0, -1.0])
    np.testing.assert_allclose(residuals(X, X.T @ [0.7], [0.7]), 0.0, atol=1e-15)


def test_residuals_mismatch():
    with pytest.raises(DimensionMismatch):
        residuals(np.eye(2), [1.0, 2.0], [1.0, 2.0, 3.0])


@pytest.mark.parametrize("seed", range(10))
def test_residuals_affine_in_theta(seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((4, 9))
    y = rng.standard_normal(9)
    t1, t2 = rng.standard_normal(4), rng.standard_normal(4)
    lhs = residuals(X, y, t1) + residuals(X, y, t2) - residuals(X, y, t1 + t2)
    np.testing.assert_allclose(lhs, residuals(X, y, np.zeros(4)), atol=1e-12)
