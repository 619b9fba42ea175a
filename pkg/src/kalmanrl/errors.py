"""Exception hierarchy shared by all modules."""


class KalmanRLError(Exception):
    """Base class for errors raised by this package."""


class ModelError(KalmanRLError, ValueError):
    """An invalid model definition. ``name`` identifies the offending field."""

    def __init__(self, message: str, name: str = "", eigenvalue: float | None = None):
        super().__init__(message)
        self.name = name
        self.eigenvalue = eigenvalue


class DimensionError(ModelError):
    pass


class NotPSDError(ModelError):
    pass


class NumericalError(KalmanRLError, ArithmeticError):
    """A numerical routine could not produce a usable result."""


class SingularInnovationError(NumericalError):
    """H Sigma H' + E could not be factorized, even after jitter."""


class NotPDInnerMatrixError(NumericalError):
    """R + G' Pi G is not positive definite."""


class NoConvergenceError(NumericalError):
    def __init__(self, message: str, iterations: int, residual: float):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class EpisodeCapError(NumericalError):
    """An episode reached the hard length cap without stopping."""
