"""Shared exception types for the supertrack package."""


class ConfigError(ValueError):
    """A configuration value or combination of values is invalid."""


class DegenerateDataError(ValueError):
    """Input data carries no usable signal (zero energy, constant, zero variance)."""


class LogParseError(ValueError):
    """A trial log file could not be parsed."""

    def __init__(self, message: str, line: int | None = None, column: str | None = None):
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", column {column!r}" if column else "") + ")"
        super().__init__(message + loc)
        self.line = line
        self.column = column


class StaleConfigWarning(UserWarning):
    """A log's recorded config digest does not match the active configuration."""


class UnsupportedModeError(RuntimeError):
    """The requested session mode has no backend on this platform."""


class RoleTakenError(RuntimeError):
    """A session role is already bound to another client."""


class ProtocolError(RuntimeError):
    """A wire message violated the session protocol."""
