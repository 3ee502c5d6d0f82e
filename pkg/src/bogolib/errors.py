"""Exception types raised across the package."""


class BogolibError(Exception):
    """Base class for all package errors."""


class NonSymmetricError(BogolibError, ValueError):
    pass


class NotPositiveDefiniteError(BogolibError, ValueError):
    pass


class DimensionMismatchError(BogolibError, ValueError):
    pass


class OverflowMatrixError(BogolibError, OverflowError):
    pass


class NotHurwitzError(BogolibError, ValueError):
    """Drift matrix has an eigenvalue with non-negative real part."""


class ZeroModeError(BogolibError, ValueError):
    """A normal-mode frequency vanishes where a positive one is required."""


class NonPositiveTemperatureError(BogolibError, ValueError):
    pass


class NonPositiveInputError(BogolibError, ValueError):
    pass


class UnphysicalInputError(BogolibError, ValueError):
    """Covariance matrix violates the uncertainty relation."""


class IndexOutOfRangeError(BogolibError, IndexError):
    pass


class FrameMismatchError(BogolibError, ValueError):
    pass


class MonotonicityViolatedError(BogolibError, ValueError):
    """Mode variances are not ordered; the extremal-mode shortcut does not apply."""


class TooManyModesForExhaustiveError(BogolibError, ValueError):
    pass


class InvalidPartitionError(BogolibError, ValueError):
    pass


class CertificateInvalidError(BogolibError, ValueError):
    pass


class ScenarioError(BogolibError, ValueError):
    pass
