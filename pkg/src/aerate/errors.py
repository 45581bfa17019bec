"""Exception types shared across the package."""


class AerateError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(AerateError, ValueError):
    """Invalid configuration value or combination."""


class ShapeError(AerateError, ValueError):
    """Array or covariate dimensions do not match."""


class DataParseError(AerateError, ValueError):
    """A covariate file row could not be parsed."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DomainError(AerateError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class DegenerateInputError(DomainError):
    """Both variance (or second-moment) inputs are zero."""


class EmptyStateError(AerateError, RuntimeError):
    """An estimate was requested before any round was absorbed."""


class InsufficientDataError(AerateError, RuntimeError):
    """Too few rounds for the requested statistic."""


class ColdArmError(AerateError, RuntimeError):
    """A regressor was asked to predict for an arm with no samples."""

    def __init__(self, arm: int):
        self.arm = arm
        super().__init__(f"arm {arm} has no stored samples")
