"""Shared exception types, mapped to CLI exit codes in `riskrec.cli`."""


class ConfigError(ValueError):
    """Malformed or inconsistent configuration input."""


class DataError(ValueError):
    """Cohort data violates a structural requirement."""


class ContinuityError(DataError):
    """An instance id appears at a visit without appearing at the previous one."""


class ExclusionError(DataError):
    """An instance reappears after the visit at which its outcome occurred."""


class ModelError(ValueError):
    """Model training or evaluation failure."""


class ConvergenceError(ModelError):
    """An iterative solver hit its iteration cap before reaching tolerance."""


class InfeasibleError(ValueError):
    """Optimization input violates its feasibility preconditions."""
