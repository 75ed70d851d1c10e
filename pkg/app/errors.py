"""
Exception hierarchy for the balancer.

Precondition failures derive from ValueError so callers that only know about
built-in exceptions still catch them.
"""
from typing import Optional, Sequence


class BalancerError(Exception):
    """Base class for every error raised by this package."""


class DomainError(BalancerError, ValueError):
    """An input lies outside the domain of an operation."""


class DimensionError(DomainError):
    """Vector or matrix lengths disagree."""


class MeasurementError(DomainError):
    """A sensor reading is physically impossible for a discharging pack."""


class CircuitError(BalancerError):
    """Internal failure of the circuit math (e.g. factorization of D failed)."""


class SchedulingError(BalancerError):
    """The scheduling LP is unbounded or produced an infeasible command."""


class ConfigError(BalancerError):
    """An experiment configuration could not be loaded or validated."""

    def __init__(self, message: str, fields: Optional[Sequence[str]] = None):
        self.fields = list(fields or [])
        if self.fields:
            message = f"{message} (fields: {', '.join(self.fields)})"
        super().__init__(message)


class TelemetryFileError(BalancerError):
    """Telemetry or summary output could not be written."""

    def __init__(self, path, reason: str):
        self.path = str(path)
        super().__init__(f"{self.path}: {reason}")
