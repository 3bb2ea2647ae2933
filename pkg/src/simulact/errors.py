"""Exception hierarchy shared by all modules."""
from __future__ import annotations

VIOLATION_MARKER = "<VIOLATION>"


class SimulactError(Exception):
    """Base class for every error raised by this package."""


class ParseError(SimulactError, ValueError):
    """Malformed input record. ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(SimulactError, ValueError):
    """Well-formed input that breaks a domain invariant.

    ``index`` is the 1-based position of the offending item when known.
    """

    def __init__(self, message: str, index: int | None = None):
        self.index = index
        super().__init__(message)


class MetricError(SimulactError, ValueError):
    pass


class SimulationError(SimulactError):
    """Raised by the session driver. Carries the step index and partial trace."""

    def __init__(self, message: str, step: int | None = None, trace=None):
        self.step = step
        self.trace = trace
        if step is not None:
            message = f"step {step}: {message}"
        super().__init__(message)


class ExhaustedSourceError(SimulationError):
    pass


class IllegalActionError(SimulationError):
    pass


class MonotonicityViolation(SimulationError):
    """An attempt to revise already emitted target tokens."""

    marker = VIOLATION_MARKER

    def __init__(self, message: str, step: int | None = None, trace=None):
        super().__init__(f"{VIOLATION_MARKER} {message}", step=step, trace=trace)


class NonProgressError(SimulationError):
    pass


class ProtocolError(SimulationError):
    """Malformed or out-of-contract agent message."""

    def __init__(self, message: str, payload: str | None = None, step=None, trace=None):
        self.payload = payload
        if payload is not None:
            message = f"{message}: {payload!r}"
        super().__init__(message, step=step, trace=trace)


class SessionTimeout(ProtocolError):
    pass


class ConfigError(SimulactError):
    pass
