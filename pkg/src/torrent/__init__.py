"""Robust least-squares regression by hard thresholding of residuals."""
from .datagen import InstanceSpec, RegressionInstance, adaptive_adversary, gen_instance
from .exceptions import (BadK, BadSpec, BudgetExceeded, DimensionMismatch, MissingReport,
                         NotConverged, SingularSystem)
from .l1 import L1Config, l1_grid_fit, l1_solve
from .linalg import residuals, solve_least_squares, spectral_norm_estimate
from .probe import check_convergence_condition, estimate_subset_spectrum
from .solvers import FitResult, SolverConfig, Termination, Variant, torrent_solve
from .sparse import IHTConfig, iht_solve, torrent_hd_solve
from .thresholding import hard_threshold_coefficients, hard_threshold_indices

__version__ = "0.1.0"
