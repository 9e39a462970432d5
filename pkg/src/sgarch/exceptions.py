"""Exception types raised by the estimation and inference routines."""


class SGarchError(Exception):
    """Base class for all package-specific errors."""


class DataError(SGarchError):
    """Raised when input data is unusable (wrong shape, NaN/inf, too short)."""


class ConvergenceError(SGarchError):
    """Raised when an optimizer cannot produce any usable iterate."""


class SingularCovarianceError(SGarchError):
    """Raised when a covariance or information matrix is numerically singular."""


class ConstraintError(SGarchError):
    """Raised when a linear constraint set is malformed or infeasible."""
