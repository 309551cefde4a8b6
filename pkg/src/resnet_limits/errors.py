"""Exception hierarchy shared across the package."""


class ResnetLimitsError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(ResnetLimitsError, ValueError):
    """Bad configuration or bad arguments (CLI exit code 2)."""


class NumericalError(ResnetLimitsError, RuntimeError):
    """Numerical failure during evaluation or simulation (CLI exit code 3)."""


class InsufficientDataError(ValidationError):
    """Not enough samples to compute the requested statistic."""


class GridTooNarrowError(NumericalError):
    """A density grid does not capture enough probability mass."""


class DegenerateSampleError(NumericalError):
    """A simulated sample hit an exact-zero or underflowed norm."""
