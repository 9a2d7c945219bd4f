"""TORRENT: robust regression by alternating least squares and hard thresholding.

The outer loop keeps an active set of the ``ceil((1 - beta) n)`` samples with
the smallest residuals and refits the model on it. The refit is pluggable:

* ``FC``  -- exact least squares on the active set,
* ``GD``  -- a single gradient step on the active-set squared loss,
* ``HYB`` -- GD while the active set is still moving, FC once it settles,
* ``HD``  -- an s-sparse least-squares fit by iterative hard thresholding
  (see :mod:`torrent.sparse`).
"""
from __future__ import annotations

import enum
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from .exceptions import DimensionMismatch
from .linalg import as_data_matrix, solve_least_squares, spectral_norm_estimate
from .thresholding import hard_threshold_indices

__all__ = [
    "Variant",
    "Termination",
    "SolverConfig",
    "IterationRecord",
    "FitResult",
    "active_size",
    "set_churn",
    "update_fc",
    "update_gd",
    "update_hyb",
    "torrent_solve",
]


class Variant(str, enum.Enum):
    FC = "FC"
    GD = "GD"
    HYB = "HYB"
    HD = "HD"


class Termination(str, enum.Enum):
    RESIDUAL_TOL = "ResidualTol"
    REL_CHANGE = "RelChange"
    MAX_ITERS = "MaxIters"


@dataclass(frozen=True)
class SolverConfig:
    """Tunables for one TORRENT solve.

    ``step_size`` defaults to ``1 / spectral_norm_estimate(X)``; it is only
    used by GD and HYB. ``sparsity_s`` is required for HD, together with the
    inner IHT controls ``inner_tol`` (default ``1e-2 * epsilon``) and
    ``max_inner_iters``; ``warm_start`` starts each inner solve from the
    current model instead of zero. ``whiten_with`` is a symmetric positive definite
    ``p x p`` matrix ``Sigma0``; the fit then runs on ``Sigma0^{-1/2} X``.
    """

    variant: Variant
    beta: float
    epsilon: float = 1e-8
    step_size: Optional[float] = None
    delta: int = 0
    max_iters: int = 400
    rel_change_tol: float = 1e-14
    sparsity_s: Optional[int] = None
    whiten_with: Optional[np.ndarray] = field(default=None, compare=False, repr=False)
    inner_tol: Optional[float] = None
    max_inner_iters: int = 1000
    warm_start: bool = False

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if not 0.0 < self.beta < 0.5:
            raise ValueError(f"beta must lie in (0, 0.5), got {self.beta}")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.step_size is not None and not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if self.delta < 0:
            raise ValueError("delta must be non-negative")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.rel_change_tol < 0:
            raise ValueError("rel_change_tol must be non-negative")
        if self.variant is Variant.HD:
            if self.sparsity_s is None or self.sparsity_s < 1:
                raise ValueError("HD needs sparsity_s >= 1")
            if self.whiten_with is not None:
                raise ValueError("whitening would destroy sparsity; not supported for HD")
        if self.inner_tol is not None and not self.inner_tol > 0:
            raise ValueError("inner_tol must be positive")

    @property
    def resolved_inner_tol(self):
        return self.inner_tol if self.inner_tol is not None else 1e-2 * self.epsilon

    def to_dict(self):
        d = asdict(self)
        d["variant"] = self.variant.value
        if self.whiten_with is not None:
            d["whiten_with"] = np.asarray(self.whiten_with).tolist()
        return d


@dataclass
class IterationRecord:
    iter: int
    update_kind: str
    active_residual_norm: float
    set_churn: int
    elapsed: float
    model_error: Optional[float] = None
    corruption_mass: Optional[float] = None


@dataclass
class FitResult:
    model: np.ndarray
    active_set: np.ndarray
    trace: list
    termination: Termination
    wall_time: float
    step_size: Optional[float] = None

    @property
    def n_iters(self):
        return len(self.trace)

    def to_dict(self):
        return {
            "model": self.model.tolist(),
            "active_set": self.active_set.tolist(),
            "termination": self.termination.value,
            "wall_time": self.wall_time,
            "n_iters": self.n_iters,
            "step_size": self.step_size,
        }


def active_size(n, beta):
    """``ceil((1 - beta) n)``, robust to float noise in the product."""
    return min(n, max(1, math.ceil(round((1.0 - beta) * n, 9))))


def set_churn(S, S_prev, n):
    """Number of indices swapped between two active sets.

    For equal-sized sets this is ``|S \\ S_prev|``. When sizes differ (the
    first step leaves the full set) the larger one-sided difference is used,
    so leaving ``[n]`` counts the ``n - |S|`` dropped samples.
    """
    mask = np.zeros(n, dtype=bool)
    mask[S_prev] = True
    common = int(np.count_nonzero(mask[S]))
    return max(len(S) - common, len(S_prev) - common)


def update_fc(X, y, S):
    """Exact least-squares refit on the active set."""
    return solve_least_squares(X[:, S], y[S])


def update_gd(X, y, S, theta, eta):
    """One gradient step ``theta - eta * X_S (X_S^T theta - y_S)``."""
    if not eta > 0:
        raise ValueError("step size must be positive")
    X_S = X[:, S]
    return theta - eta * (X_S @ (X_S.T @ theta - y[S]))


def update_hyb(X, y, S, S_prev, theta, eta, delta):
    """GD step if more than ``delta`` samples changed, otherwise FC.

    ``S_prev=None`` means there is no earlier active set, which counts as
    unstable. Returns ``(theta, kind)`` with ``kind`` in ``{"FC", "GD"}``.
    """
    n = y.shape[0]
    if S_prev is None or set_churn(S, S_prev, n) > delta:
        return update_gd(X, y, S, theta, eta), "GD"
    return update_fc(X, y, S), "FC"


def _inverse_sqrt(sigma0):
    sigma0 = np.asarray(sigma0, dtype=float)
    if sigma0.ndim != 2 or sigma0.shape[0] != sigma0.shape[1]:
        raise DimensionMismatch("whitening matrix must be square")
    if not np.allclose(sigma0, sigma0.T, rtol=1e-10, atol=1e-12):
        raise ValueError("whitening matrix must be symmetric")
    evals, evecs = np.linalg.eigh(sigma0)
    if evals.min() <= 0:
        raise ValueError("whitening matrix must be positive definite")
    return (evecs / np.sqrt(evals)) @ evecs.T


def _check_inputs(X, y, ground_truth, corruption):
    X = as_data_matrix(X)
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[1] != y.shape[0]:
        raise DimensionMismatch(f"X has {X.shape[1]} samples, y has {y.shape[0]}")
    if ground_truth is not None:
        ground_truth = np.asarray(ground_truth, dtype=float).ravel()
        if ground_truth.shape[0] != X.shape[0]:
            raise DimensionMismatch("ground truth length differs from p")
    if corruption is not None:
        corruption = np.asarray(corruption, dtype=float).ravel()
        if corruption.shape[0] != y.shape[0]:
            raise DimensionMismatch("corruption vector length differs from n")
    return X, y, ground_truth, corruption


UpdateFn = Callable[[np.ndarray, np.ndarray, np.ndarray, Optional[np.ndarray],
                     np.ndarray, np.ndarray], tuple]


def run_torrent(X, y, config, update: UpdateFn, ground_truth=None, corruption=None,
                whiten=None, start=None, step_size=None):
    """The outer thresholding loop shared by every variant.

    ``update(X, y, S, S_prev, theta, r)`` returns ``(theta_new, kind)``; ``r``
    is the full residual vector for ``theta``. ``whiten`` maps fitted
    coordinates back to the original ones.
    """
    start = time.perf_counter() if start is None else start
    p, n = X.shape
    k = active_size(n, config.beta)

    theta = np.zeros(p)
    active = np.arange(n)
    prev = None
    r = y.copy()
    trace = []
    termination = Termination.MAX_ITERS
    for t in range(1, config.max_iters + 1):
        theta_new, kind = update(X, y, active, prev, theta, r)
        r = y - X.T @ theta_new
        new_active = hard_threshold_indices(r, k)
        active_norm = float(np.linalg.norm(r[new_active]))

        record = IterationRecord(
            iter=t,
            update_kind=kind,
            active_residual_norm=active_norm,
            set_churn=set_churn(new_active, active, n),
            elapsed=time.perf_counter() - start,
        )
        if ground_truth is not None:
            model = theta_new if whiten is None else whiten @ theta_new
            record.model_error = float(np.linalg.norm(model - ground_truth))
        if corruption is not None:
            record.corruption_mass = float(np.linalg.norm(corruption[new_active]))
        trace.append(record)

        change = float(np.linalg.norm(theta_new - theta))
        scale = float(np.linalg.norm(theta_new))
        prev, active, theta = active, new_active, theta_new
        if active_norm <= config.epsilon:
            termination = Termination.RESIDUAL_TOL
            break
        if change <= config.rel_change_tol * scale:
            termination = Termination.REL_CHANGE
            break

    model = theta if whiten is None else whiten @ theta
    return FitResult(
        model=model,
        active_set=active,
        trace=trace,
        termination=termination,
        wall_time=time.perf_counter() - start,
        step_size=step_size,
    )


def torrent_solve(X, y, config: SolverConfig, ground_truth=None, corruption=None):
    """Fit a linear model robust to sparse response corruptions.

    Parameters
    ----------
    X : array, shape (p, n)
        Data matrix, one sample per column.
    y : array, shape (n,)
        Possibly corrupted responses.
    config : SolverConfig
    ground_truth : array, shape (p,), optional
        True model; enables ``model_error`` in the trace.
    corruption : array, shape (n,), optional
        True corruption vector; enables ``corruption_mass`` in the trace.

    Returns
    -------
    FitResult
    """
    start = time.perf_counter()
    X, y, ground_truth, corruption = _check_inputs(X, y, ground_truth, corruption)
    if config.variant is Variant.HD:
        from .sparse import torrent_hd_solve

        return torrent_hd_solve(X, y, config, ground_truth, corruption)

    whiten = None
    if config.whiten_with is not None:
        whiten = _inverse_sqrt(config.whiten_with)
        if whiten.shape[0] != X.shape[0]:
            raise DimensionMismatch("whitening matrix does not match p")
        X = whiten @ X

    eta = None
    if config.variant in (Variant.GD, Variant.HYB):
        eta = config.step_size
        if eta is None:
            eta = 1.0 / spectral_norm_estimate(X)

    variant = config.variant
    delta = config.delta

    def update(X, y, S, S_prev, theta, r):
        if variant is Variant.FC:
            return update_fc(X, y, S), "FC"
        if variant is Variant.HYB and S_prev is not None \
                and set_churn(S, S_prev, y.shape[0]) <= delta:
            return update_fc(X, y, S), "FC"
        # gradient of the active-set loss is -X_S r_S; a masked product avoids
        # gathering the columns
        masked = np.zeros_like(r)
        masked[S] = r[S]
        return theta + eta * (X @ masked), "GD"

    return run_torrent(X, y, config, update, ground_truth, corruption,
                       whiten=whiten, start=start, step_size=eta)
