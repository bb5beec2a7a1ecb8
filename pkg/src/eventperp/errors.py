"""Exception types shared across the engine.

Error codes are stable strings used in validation reports, CLI exit paths,
and the service's error payloads.
"""

from __future__ import annotations

from dataclasses import dataclass


class EventPerpError(Exception):
    """Base class for all engine errors."""


@dataclass(frozen=True)
class SpecError:
    """One named validation failure: a stable code plus the offending field."""

    code: str
    field: str
    message: str

    def __str__(self) -> str:
        return f"{self.code}({self.field}): {self.message}"


class SpecValidationError(EventPerpError):
    """Raised when a variant spec fails validation; carries all failures."""

    def __init__(self, errors: list[SpecError]):
        self.errors = list(errors)
        super().__init__("; ".join(str(e) for e in self.errors))


class EmptySeriesError(EventPerpError):
    """A leg has no price points where at least one is required."""


class UnexpectedLegError(EventPerpError):
    """A settlement event arrived for a leg the contract does not reference."""


class WeightMismatchError(EventPerpError):
    """Weight vector length does not match the leg count."""


class AllLegsResolvedError(EventPerpError):
    """Drop-on-resolution rebalance has no surviving legs to renormalize."""


class WindowTooShortError(EventPerpError):
    """Series span is shorter than one full estimator window."""


class MissingMicrostructureSeriesError(EventPerpError):
    """A liquidity measure needs an optional series the leg does not carry."""


class SameLegError(EventPerpError):
    """A conditional pair references the same leg on both sides."""


class IncompatibleCorrectionError(EventPerpError):
    """Funding correction is not defined for the contract's support."""


class EmptyWindowError(EventPerpError):
    """A TWAP window lies entirely before the first observation."""


class ZeroIndexError(EventPerpError):
    """Re-anchor roll cannot rescale entries against a zero index."""


class MissingVolumeSeriesError(EventPerpError):
    """Volume-weighted roll requires a volume series that is absent."""


class PhaseTransitionError(EventPerpError):
    """Illegal contract phase transition (resolved states are absorbing)."""


class SchemaError(EventPerpError):
    """Input file violates the tick/resolution/group schema."""

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        self.row = row
        self.column = column
        super().__init__(message)


class ConfigError(EventPerpError):
    """Run configuration is malformed or contains unknown keys."""


class ReplayAbortedError(EventPerpError):
    """Replay failed mid-run; a partial report is attached."""

    def __init__(self, message: str, partial_report=None):
        self.partial_report = partial_report
        super().__init__(message)
