"""Exception types raised across the package."""


class TorrentError(Exception):
    """Base class for all package errors."""


class SingularSystem(TorrentError, ArithmeticError):
    """Least squares produced non-finite coefficients even after the fallback."""


class BadK(TorrentError, ValueError):
    """Thresholding count outside the admissible range."""


class DimensionMismatch(TorrentError, ValueError):
    pass


class BadSpec(TorrentError, ValueError):
    """An instance or experiment specification violates its invariants."""


class BudgetExceeded(TorrentError, RuntimeError):
    """Exact subset enumeration would exceed the enumeration cap."""


class MissingReport(TorrentError, LookupError):
    """A convergence check needs a spectrum report that was not supplied."""


class NotConverged(TorrentError, RuntimeError):
    """Iterative solver hit its cap; ``result`` carries the best iterate."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result
