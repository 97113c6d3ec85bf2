"""Exception types shared across the package."""


class PccontrolError(Exception):
    """Base class for all package errors."""


class ShapeError(PccontrolError, ValueError):
    """An array argument has the wrong shape or an incompatible ambient."""


class InvalidSystemError(PccontrolError, ValueError):
    """System matrices are malformed (non-finite entries, bad dimensions)."""


class EvaluationOverflowError(PccontrolError, ArithmeticError):
    """A functional evaluation produced a non-finite value."""


class ConfigError(PccontrolError, ValueError):
    """A run configuration is malformed or inconsistent."""


class InvalidWitnessError(PccontrolError, ValueError):
    """An infeasibility witness is degenerate (identically zero)."""


class ProblemTooLargeError(PccontrolError, ValueError):
    """A dense certificate was requested above the configured size cap."""


class GridAlignmentError(PccontrolError, ValueError):
    """A requested time does not fall on a node of the time grid."""


class FrequencyInputError(PccontrolError, ValueError):
    """Duplicate frequencies were passed to a modal uniqueness check."""
