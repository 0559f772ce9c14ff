"""Exception types raised across the toolkit."""


class SltmError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(SltmError, ValueError):
    """Input failed a precondition or schema check."""


class InvalidGeometryError(ValidationError):
    pass


class DimensionError(ValidationError):
    pass


class ConfigurationError(ValidationError):
    pass


class ConvergenceError(SltmError):
    """The sequence optimizer could not reach its threshold.

    The best sequence found is kept on the exception so callers can
    still use it as a best-effort result.
    """

    def __init__(self, message, best_sequence=None, best_mean=None):
        super().__init__(message)
        self.best_sequence = best_sequence
        self.best_mean = best_mean
