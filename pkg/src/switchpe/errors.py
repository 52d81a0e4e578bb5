"""Exception types shared across the package."""


class SwitchPEError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(SwitchPEError):
    """Operand dimensions disagree."""


class ConfigError(SwitchPEError):
    """A configuration value is invalid or inconsistent."""


class DataError(SwitchPEError):
    """Input data violates a documented precondition."""


class ParseError(SwitchPEError):
    """A corpus file is malformed. Carries the offending line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class UsageError(SwitchPEError):
    """An API was called in an unsupported way."""


class VocabError(SwitchPEError):
    """A token lookup failed (out of vocabulary)."""


class LengthError(SwitchPEError):
    """A sequence exceeds the capacity of a positional table."""


class CompatibilityError(SwitchPEError):
    """A checkpoint does not match the requested configuration or data."""
