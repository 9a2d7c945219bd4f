"""Dense kernels shared by the solvers.

Data matrices follow the ``p x n`` convention: column ``i`` is the sample
``x_i``. Arrays are kept Fortran-ordered so that a column subset gathers
contiguous samples.
"""
import numpy as np
import scipy.linalg

from .exceptions import DimensionMismatch, SingularSystem

__all__ = [
    "as_data_matrix",
    "solve_least_squares",
    "spectral_norm_estimate",
    "residuals",
]

POWER_TOL = 1e-6
POWER_MAX_ITERS = 500
JITTER = 1e-10


def as_data_matrix(X, fortran=False):
    """Return ``X`` as a 2-d float64 array; a 1-d input is one feature row."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[np.newaxis, :]
    if X.ndim != 2:
        raise ValueError(f"data matrix must be 2-d, got shape {X.shape}")
    return np.asfortranarray(X) if fortran else X


def solve_least_squares(X_S, y_S):
    """Least-squares fit on a column subset via the normal equations.

    Parameters
    ----------
    X_S : array, shape (p, m)
        Columns are the samples in the active set.
    y_S : array, shape (m,)
        Responses for those samples.

    Returns
    -------
    theta : array, shape (p,)
        Minimizer of ``sum_i (y_i - <theta, x_i>)**2`` over the subset.

    Notes
    -----
    The Gram matrix is Cholesky-factored. If it is not numerically positive
    definite the diagonal is jittered by ``1e-10 * trace`` and re-factored;
    if that also fails a minimum-norm ``lstsq`` solution is returned.
    """
    X_S = as_data_matrix(X_S)
    y_S = np.asarray(y_S, dtype=float).ravel()
    if X_S.shape[1] != y_S.shape[0]:
        raise DimensionMismatch(
            f"X_S has {X_S.shape[1]} columns but y_S has {y_S.shape[0]} entries")
    if X_S.shape[1] < 1:
        raise ValueError("least squares needs at least one sample")
    if not (np.all(np.isfinite(X_S)) and np.all(np.isfinite(y_S))):
        raise SingularSystem("non-finite entries in least-squares inputs")

    gram = X_S @ X_S.T
    rhs = X_S @ y_S
    theta = _cholesky_solve(gram, rhs)
    if theta is None:
        jitter = JITTER * np.trace(gram)
        if jitter > 0:
            theta = _cholesky_solve(gram + jitter * np.eye(gram.shape[0]), rhs)
    if theta is None:
        theta = np.linalg.lstsq(X_S.T, y_S, rcond=None)[0]
    if not np.all(np.isfinite(theta)):
        raise SingularSystem("least-squares fallback produced non-finite coefficients")
    return theta


def _cholesky_solve(gram, rhs):
    try:
        factor = scipy.linalg.cho_factor(gram, lower=False, check_finite=False)
    except np.linalg.LinAlgError:
        return None
    theta = scipy.linalg.cho_solve(factor, rhs, check_finite=False)
    if not np.all(np.isfinite(theta)):
        return None
    return theta


def spectral_norm_estimate(X_S, tol=POWER_TOL, max_iters=POWER_MAX_ITERS):
    """Estimate ``lambda_max(X_S X_S^T)`` by power iteration.

    The iteration runs on the smaller of the two Gram matrices (both share
    their nonzero spectrum), starts from the normalized all-ones vector and
    stops once the Rayleigh quotient changes by at most ``tol`` relative.
    The Rayleigh quotient never exceeds the true value; the result is also
    floored at the largest squared column norm, which is itself a valid
    lower bound.
    """
    X_S = as_data_matrix(X_S)
    p, m = X_S.shape
    # rescale so squared entries neither underflow nor overflow
    scale = float(np.max(np.abs(X_S))) if X_S.size else 0.0
    if scale == 0.0 or not np.isfinite(scale):
        return 0.0 if scale == 0.0 else float("inf")
    Z = X_S / scale
    gram = Z @ Z.T if p <= m else Z.T @ Z
    floor = float(np.max(np.einsum("ij,ij->j", Z, Z)))

    v = np.full(gram.shape[0], 1.0 / np.sqrt(gram.shape[0]))
    w = gram @ v
    if not np.any(w):
        # start vector orthogonal to the range; restart along the heaviest row/column
        v = gram[:, int(np.argmax(np.diag(gram)))].copy()
        v /= np.linalg.norm(v)
        w = gram @ v
    estimate = float(v @ w)
    for _ in range(max_iters):
        v = w / np.linalg.norm(w)
        w = gram @ v
        previous, estimate = estimate, float(v @ w)
        if abs(estimate - previous) <= tol * abs(estimate):
            break
    return max(estimate, floor) * scale * scale


def residuals(X, y, theta):
    """Return ``y - X^T theta``."""
    X = as_data_matrix(X)
    y = np.asarray(y, dtype=float).ravel()
    theta = np.asarray(theta, dtype=float).ravel()
    if X.shape != (theta.shape[0], y.shape[0]):
        raise DimensionMismatch(
            f"shape mismatch: X {X.shape}, theta {theta.shape}, y {y.shape}")
    return y - X.T @ theta
