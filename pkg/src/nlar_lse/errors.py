"""Exception hierarchy shared by every module."""


class NlarError(Exception):
    """Base class for toolkit errors."""


class InvalidArgument(NlarError, ValueError):
    pass


class OutOfRange(NlarError, IndexError):
    pass


class NumericError(NlarError, ArithmeticError):
    """Raised when a computation produces a non-finite value or fails to converge.

    ``step`` carries the offending step index when one is known.
    """

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class ContractViolation(NlarError, RuntimeError):
    pass


class CertificationFailure(NlarError):
    """No threshold in the grid certified the excitation condition."""


class ResourceError(NlarError, MemoryError):
    pass


class ConfigError(NlarError, ValueError):
    """Configuration schema violation; ``field`` names the offending key."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
