"""Exception types shared across the package."""


class InvalidParameterError(ValueError):
    """A numeric or structural argument violates an operation's precondition."""


class InvalidCompositionError(ValueError):
    """Control concatenation/restriction called with mismatched step indices."""


class UnsupportedModeError(ValueError):
    """An engine was asked to run under a timing mode it does not support."""


class ResourceLimitError(RuntimeError):
    """The requested instance is too large for exhaustive computation."""


class ModelBreakdownError(RuntimeError):
    """State evolution produced a value outside the model's domain."""


class ConfigError(ValueError):
    """Configuration file is malformed; carries a line-numbered diagnostic."""
