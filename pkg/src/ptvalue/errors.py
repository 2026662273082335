"""Exception types shared across the package."""


class PtValueError(Exception):
    """Base class for all package errors."""


class ModelError(PtValueError, ValueError):
    """An MDP/MRP definition violates its invariants."""


class ConfigError(PtValueError, ValueError):
    """An experiment, schedule or environment configuration is invalid."""


class UsageError(PtValueError, RuntimeError):
    """An object was driven in an order its protocol does not allow."""


class NumericalError(PtValueError, FloatingPointError):
    """A non-finite value appeared during an update."""


class ConvergenceError(PtValueError, RuntimeError):
    """An iterative routine hit its iteration cap."""
