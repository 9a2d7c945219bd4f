"""Hard thresholding on residual and coefficient vectors.

Both operators break magnitude ties in favour of the smaller index, so the
selected set is a deterministic function of the input.
"""
import numpy as np

from .exceptions import BadK

__all__ = ["hard_threshold_indices", "hard_threshold_coefficients"]

# below this length a stable full sort is cheaper than partitioning
SORT_CUTOFF = 64


def _select(mags, k, smallest):
    """Indices of the ``k`` smallest (or largest) magnitudes, ascending."""
    n = mags.shape[0]
    if k == n:
        return np.arange(n)
    if n < SORT_CUTOFF:
        keys = mags if smallest else -mags
        return np.sort(np.argsort(keys, kind="stable")[:k])

    # the k-th order statistic splits the vector; entries tied with it are
    # admitted in index order until k are kept
    if smallest:
        boundary = np.partition(mags, k - 1)[k - 1]
        strict = np.flatnonzero(mags < boundary)
    else:
        boundary = np.partition(mags, n - k)[n - k]
        strict = np.flatnonzero(mags > boundary)
    tied = np.flatnonzero(mags == boundary)[: k - strict.shape[0]]
    return np.sort(np.concatenate([strict, tied]))


def hard_threshold_indices(v, k):
    """Active-set selection: indices of the ``k`` smallest ``|v_i|``.

    Parameters
    ----------
    v : array, shape (n,)
        Residual vector.
    k : int
        Number of indices to keep, ``1 <= k <= n``.

    Returns
    -------
    indices : array of int, shape (k,)
        Sorted ascending.
    """
    v = np.asarray(v, dtype=float).ravel()
    n = v.shape[0]
    k = int(k)
    if not 1 <= k <= n:
        raise BadK(f"k={k} outside [1, {n}]")
    return _select(np.abs(v), k, smallest=True)


def hard_threshold_coefficients(theta, s):
    """Keep the ``s`` largest-magnitude coefficients and zero the rest."""
    theta = np.asarray(theta, dtype=float).ravel()
    p = theta.shape[0]
    s = int(s)
    if not 1 <= s <= p:
        raise BadK(f"s={s} outside [1, {p}]")
    out = np.zeros_like(theta)
    keep = _select(np.abs(theta), s, smallest=False)
    out[keep] = theta[keep]
    return out
