"""Exception hierarchy shared by every adaptattn module."""


class AdaptAttnError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(AdaptAttnError, ValueError):
    """Invalid configuration value or combination of values."""


class DimensionError(AdaptAttnError, ValueError):
    """Tensor shapes do not agree for the requested operation."""


class DataError(AdaptAttnError, ValueError):
    """Input data violates an operation's precondition (bad id, empty document, ...)."""


class ContractError(AdaptAttnError, RuntimeError):
    """A caller broke an API contract (non-scalar loss, mixed-bin batch, ...)."""


class NumericError(AdaptAttnError, ArithmeticError):
    """Training produced a non-finite value."""
