"""Exception hierarchy for the package."""


class DivrateError(Exception):
    """Base class for all errors raised by ``divrate``."""


class GridMismatchError(DivrateError, ValueError):
    """Two grid functions that must share a grid do not."""


class DomainError(DivrateError, ValueError):
    """An argument lies outside the domain where the operation is defined."""


class ConvergenceError(DivrateError, RuntimeError):
    """An iterative procedure stopped without meeting its tolerance.

    Attributes
    ----------
    residual : float
        Last value of the stopping quantity.
    iterations : int
        Number of iterations performed.
    """

    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class DegenerateDataError(DivrateError, ValueError):
    """Input data cannot produce a meaningful estimate (e.g. zero moments)."""
