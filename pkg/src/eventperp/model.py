"""Shared domain types: per-leg series, variant configuration, contract state,
and the replay event vocabulary.

Everything here is an immutable value after construction except
:class:`ContractState`, which the replay harness mutates single-threaded.
Timestamps are integer milliseconds since epoch throughout; alignment is
last-observation-carried-forward (LOCF) on a uniform grid.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .errors import (
    EmptySeriesError,
    PhaseTransitionError,
    SpecError,
    SpecValidationError,
)

DEFAULT_GRID_MS = 1000
DEFAULT_NEGRISK_TOL = 0.02
DEFAULT_DENOM_FLOOR = 0.01
DAY_MS = 86_400_000


# ---------------------------------------------------------------------------
# Per-leg data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProbabilityPoint:
    """One venue-quoted probability observation."""

    time_ms: int
    value: float

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"probability {self.value} outside [0, 1]")


@dataclass(frozen=True)
class ResolutionRecord:
    """Terminal outcome of one leg: resolution time tau and binary outcome."""

    tau_ms: int
    outcome: int

    def __post_init__(self):
        if self.outcome not in (0, 1):
            raise ValueError(f"outcome {self.outcome} not binary")


@dataclass(frozen=True)
class LegSeries:
    """One market's probability path plus optional microstructure series.

    Optional series, when present, share the points' timestamps exactly
    (one value per point) and are non-negative.
    """

    leg_id: str
    points: tuple[ProbabilityPoint, ...]
    depth_200bps: Optional[tuple[float, ...]] = None
    half_spread: Optional[tuple[float, ...]] = None
    volume: Optional[tuple[float, ...]] = None
    resolution: Optional[ResolutionRecord] = None

    def __post_init__(self):
        times = [p.time_ms for p in self.points]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError(f"leg {self.leg_id}: timestamps not strictly increasing")
        for name in ("depth_200bps", "half_spread", "volume"):
            series = getattr(self, name)
            if series is None:
                continue
            if len(series) != len(self.points):
                raise ValueError(f"leg {self.leg_id}: {name} not aligned with points")
            if any(v < 0 for v in series):
                raise ValueError(f"leg {self.leg_id}: {name} has negative values")
        if self.resolution is not None and self.points:
            last = self.points[-1]
            ok = self.resolution.tau_ms >= last.time_ms or (
                last.time_ms == self.resolution.tau_ms
                and last.value == float(self.resolution.outcome)
            )
            if not ok:
                raise ValueError(
                    f"leg {self.leg_id}: resolution tau {self.resolution.tau_ms} "
                    f"precedes last observation {last.time_ms}"
                )

    @property
    def first_time(self) -> int:
        if not self.points:
            raise EmptySeriesError(f"leg {self.leg_id} has no points")
        return self.points[0].time_ms

    @property
    def last_time(self) -> int:
        if not self.points:
            raise EmptySeriesError(f"leg {self.leg_id} has no points")
        t = self.points[-1].time_ms
        if self.resolution is not None:
            t = max(t, self.resolution.tau_ms)
        return t


@dataclass(frozen=True)
class NegRiskGroup:
    """Mutually exclusive legs whose quoted probabilities sum to one."""

    group_id: str
    members: tuple[str, ...]

    def __post_init__(self):
        if len(self.members) < 2:
            raise ValueError(f"group {self.group_id}: needs at least 2 members")
        if len(set(self.members)) != len(self.members):
            raise ValueError(f"group {self.group_id}: duplicate members")


# ---------------------------------------------------------------------------
# Variant configuration
# ---------------------------------------------------------------------------


class FloorAction(str, enum.Enum):
    """What the conditional constructor does when the denominator is floored."""

    CLIP_TO_LAST = "clip-to-last"
    HALT = "halt"


class OrderingRule(str, enum.Enum):
    """Conditional behavior when the tracked event resolves before the
    conditioning event."""

    SETTLE_AT_A = "settle-at-A"
    JOINT_AT_B = "joint-at-B"


@dataclass(frozen=True)
class TerminationRule:
    """Early-termination valuation when the conditioning event resolves NO."""

    kind: str  # last-tick | fixed | twap
    value: float | None = None  # fixed only
    window_ms: int | None = None  # twap only

    def __post_init__(self):
        if self.kind not in ("last-tick", "fixed", "twap"):
            raise ValueError(f"unknown termination rule {self.kind!r}")
        if self.kind == "fixed" and self.value is None:
            raise ValueError("fixed termination rule needs a value")
        if self.kind == "twap" and (self.window_ms is None or self.window_ms <= 0):
            raise ValueError("twap termination rule needs a positive window")

    @staticmethod
    def last_tick() -> "TerminationRule":
        return TerminationRule("last-tick")

    @staticmethod
    def fixed(value: float) -> "TerminationRule":
        return TerminationRule("fixed", value=value)

    @staticmethod
    def twap(window_ms: int = DAY_MS) -> "TerminationRule":
        return TerminationRule("twap", window_ms=window_ms)


@dataclass(frozen=True)
class Conditional:
    """Contract on the probability of one event given another.

    With a listed joint leg the underlying is joint / conditioning; without
    one, both legs must belong to a validated negRisk group and the
    underlying is leg_a / (1 - leg_b).
    """

    leg_a: str
    leg_b: str
    joint_leg: Optional[str] = None
    denom_floor: float = DEFAULT_DENOM_FLOOR
    floor_action: FloorAction = FloorAction.CLIP_TO_LAST
    termination_rule: TerminationRule = field(default_factory=TerminationRule.twap)
    ordering_rule: OrderingRule = OrderingRule.JOINT_AT_B

    kind = "conditional"


@dataclass(frozen=True)
class Spread:
    """Contract on the difference of two event probabilities."""

    leg_a: str
    leg_b: str

    kind = "spread"


class WeightRule(str, enum.Enum):
    STATIC = "static"
    EQUAL = "equal"
    VOLUME_SNAPSHOT = "volume-snapshot"


class RebalanceRule(str, enum.Enum):
    NONE = "none"
    DROP_ON_RESOLUTION = "drop-on-resolution"


class BasketHaltPolicy(str, enum.Enum):
    CLOSEST_LEG = "closest-leg"
    SINGLE_MATURITY = "single-maturity"


@dataclass(frozen=True)
class Basket:
    """Contract on a normalized weighted sum of event probabilities."""

    legs: tuple[str, ...]
    weight_rule: WeightRule = WeightRule.EQUAL
    weights: Optional[tuple[float, ...]] = None  # static rule only
    snapshot_ms: Optional[int] = None  # volume-snapshot rule only
    rebalance_rule: RebalanceRule = RebalanceRule.NONE
    halt_policy: BasketHaltPolicy = BasketHaltPolicy.CLOSEST_LEG

    kind = "basket"


class VarianceEstimator(str, enum.Enum):
    LEVEL = "level"
    INCREMENTS = "increments"


class VarianceNormalization(str, enum.Enum):
    NONE = "none"
    PER_WINDOW = "per-window"


@dataclass(frozen=True)
class Variance:
    """Contract on the rolling-window dispersion of one leg's probability."""

    leg: str
    estimator: VarianceEstimator = VarianceEstimator.LEVEL
    window_ms: int = 6 * 3_600_000
    tick_ms: int = 60_000
    normalization: VarianceNormalization = VarianceNormalization.PER_WINDOW

    kind = "variance"


@dataclass(frozen=True)
class Entropy:
    """Contract on the binary entropy of one leg's probability."""

    leg: str

    kind = "entropy"


class LiquidityMeasure(str, enum.Enum):
    MEDIAN_HALF_SPREAD = "median-half-spread"
    DEPTH = "depth"
    AMIHUD = "amihud"


@dataclass(frozen=True)
class Liquidity:
    """Contract on a microstructure quality measure over member legs."""

    measure: LiquidityMeasure
    member_legs: tuple[str, ...]
    aggregate: str = "mean"  # cross-member combination: mean | median

    kind = "liquidity"

    def __post_init__(self):
        if self.aggregate not in ("mean", "median"):
            raise ValueError(f"unknown aggregation {self.aggregate!r}")


@dataclass(frozen=True)
class RollMechanism:
    """How exposure transitions from one constituent to the next."""

    kind: str  # cliff | linear | volume-weighted
    at_ms: int | None = None  # cliff
    start_ms: int | None = None  # linear / volume-weighted accumulation start
    end_ms: int | None = None  # linear
    volume_target: float | None = None  # volume-weighted

    def __post_init__(self):
        if self.kind == "cliff":
            if self.at_ms is None:
                raise ValueError("cliff roll needs at_ms")
        elif self.kind == "linear":
            if self.start_ms is None or self.end_ms is None or self.end_ms <= self.start_ms:
                raise ValueError("linear roll needs start_ms < end_ms")
        elif self.kind == "volume-weighted":
            # No default target: the transition rate must be an explicit choice.
            if self.start_ms is None or self.volume_target is None or self.volume_target <= 0:
                raise ValueError("volume-weighted roll needs start_ms and a positive volume_target")
        else:
            raise ValueError(f"unknown roll mechanism {self.kind!r}")


class RollBasisRule(str, enum.Enum):
    RE_ANCHOR = "re-anchor"
    MAINTAIN_NOTIONAL = "maintain-notional"
    CASH_SETTLE = "cash-settle"


@dataclass(frozen=True)
class Rolling:
    """Perpetual exposure to a succession of constituent legs.

    Constituents are ordered by resolution time; each consecutive pair gets
    one roll mechanism. Under the complete-before-halt policy a roll whose
    completion lands inside the outgoing constituent's resolution zone is
    flagged and full jump-aware margin stays active through the overlap.
    """

    constituents: tuple[str, ...]
    mechanisms: tuple[RollMechanism, ...]
    basis_rule: RollBasisRule = RollBasisRule.RE_ANCHOR

    kind = "rolling"

    def __post_init__(self):
        if len(self.constituents) < 1:
            raise ValueError("rolling variant needs at least one constituent")
        if len(self.mechanisms) != max(0, len(self.constituents) - 1):
            raise ValueError("need one roll mechanism per consecutive constituent pair")


class FundingTarget(str, enum.Enum):
    BASIS = "basis"
    DIVERGENCE = "divergence"
    DISAGREEMENT = "disagreement"


class SettlementCadence(str, enum.Enum):
    CONTINUOUS = "continuous"
    PERIODIC = "periodic"
    ON_CLOSE = "on-close"


@dataclass(frozen=True)
class FundingOnly:
    """Settlement-free contract paying only the funding flow on a target
    quantity (basis of one leg, or divergence between two legs)."""

    target: FundingTarget
    leg_a: str
    leg_b: Optional[str] = None  # divergence only
    clip: tuple[float, float] = (-0.05, 0.05)
    cadence: SettlementCadence = SettlementCadence.CONTINUOUS
    cadence_interval_ms: Optional[int] = None  # periodic only

    kind = "funding-only"


VariantSpec = Union[
    Conditional, Spread, Basket, Variance, Entropy, Liquidity, Rolling, FundingOnly
]

#: Variants whose underlying admits a terminal collapse (jump margin applies).
COLLAPSING_KINDS = ("conditional", "spread", "basket", "rolling")


# ---------------------------------------------------------------------------
# Positions and contract state
# ---------------------------------------------------------------------------


class Side(str, enum.Enum):
    LONG = "long"
    SHORT = "short"

    @property
    def sign(self) -> int:
        return 1 if self is Side.LONG else -1


@dataclass
class Position:
    """One open position. Margin is posted explicitly so top-ups and funding
    debits are representable; one unit of notional pays (mark - entry)."""

    trader_id: str
    side: Side
    notional: float
    entry_price: float
    margin_posted: float
    open_time: int
    position_id: int = 0

    def __post_init__(self):
        if self.notional <= 0:
            raise ValueError("notional must be positive")
        if self.margin_posted < 0:
            raise ValueError("margin_posted must be >= 0")

    def unrealized_pnl(self, mark: float) -> float:
        return self.side.sign * self.notional * (mark - self.entry_price)


class Phase(str, enum.Enum):
    ACTIVE = "active"
    HALTED = "halted"
    RESOLVED = "resolved"
    TERMINATED_EARLY = "terminated-early"


_ALLOWED_TRANSITIONS = {
    Phase.ACTIVE: {Phase.HALTED, Phase.RESOLVED, Phase.TERMINATED_EARLY},
    Phase.HALTED: {Phase.ACTIVE, Phase.RESOLVED, Phase.TERMINATED_EARLY},
    Phase.RESOLVED: set(),
    Phase.TERMINATED_EARLY: set(),
}


@dataclass
class ContractState:
    """Live contract bookkeeping mutated only by the replay harness."""

    phase: Phase = Phase.ACTIVE
    underlying: float = math.nan
    mark: float = math.nan
    positions: list[Position] = field(default_factory=list)
    accrued_funding: dict[int, float] = field(default_factory=dict)
    active_constituent: int = 0
    frozen_legs: dict[str, int] = field(default_factory=dict)

    def transition(self, new_phase: Phase) -> None:
        if new_phase == self.phase:
            return
        if new_phase not in _ALLOWED_TRANSITIONS[self.phase]:
            raise PhaseTransitionError(f"illegal transition {self.phase.value} -> {new_phase.value}")
        self.phase = new_phase

    def freeze_leg(self, leg_id: str, outcome: int) -> None:
        if leg_id in self.frozen_legs:
            if self.frozen_legs[leg_id] != outcome:
                raise ValueError(f"leg {leg_id} already frozen with a different outcome")
            return
        self.frozen_legs[leg_id] = outcome

    @property
    def settled(self) -> bool:
        return self.phase in (Phase.RESOLVED, Phase.TERMINATED_EARLY)


# ---------------------------------------------------------------------------
# Replay events
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PriceUpdate:
    time_ms: int
    leg_id: str
    point: ProbabilityPoint

    kind = "price-update"


@dataclass(frozen=True)
class Resolution:
    time_ms: int
    leg_id: str
    record: ResolutionRecord

    kind = "resolution"


@dataclass(frozen=True)
class FundingTick:
    time_ms: int

    kind = "funding-tick"


@dataclass(frozen=True)
class RollCheckpoint:
    time_ms: int

    kind = "roll-checkpoint"


@dataclass(frozen=True)
class TraderOrder:
    time_ms: int
    trader_id: str
    side: Side
    notional: float
    leverage: float

    kind = "trader-order"


ReplayEvent = Union[PriceUpdate, Resolution, FundingTick, RollCheckpoint, TraderOrder]

# Ties within one timestamp: resolutions first so constructors see frozen
# outcomes before same-timestamp price updates; trader orders last.
_KIND_ORDER = {
    "resolution": 0,
    "price-update": 1,
    "roll-checkpoint": 2,
    "funding-tick": 3,
    "trader-order": 4,
}


def event_sort_key(event: ReplayEvent) -> tuple:
    leg = getattr(event, "leg_id", "")
    trader = getattr(event, "trader_id", "")
    return (event.time_ms, _KIND_ORDER[event.kind], leg, trader)


def sort_events(events: Sequence[ReplayEvent]) -> list[ReplayEvent]:
    """Return the globally ordered event stream (a total order)."""
    return sorted(events, key=event_sort_key)


# ---------------------------------------------------------------------------
# Alignment
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AlignedGrid:
    """LOCF values of every leg on a shared uniform grid.

    Values are NaN before a leg's first observation; after a leg's
    resolution time the outcome value is carried.
    """

    timestamps: np.ndarray  # int64, strictly increasing
    values: dict[str, np.ndarray]  # leg_id -> float64

    def leg(self, leg_id: str) -> np.ndarray:
        return self.values[leg_id]

    def value_at(self, leg_id: str, time_ms: int) -> float:
        """LOCF lookup: the leg's value at the last grid point <= time_ms."""
        idx = int(np.searchsorted(self.timestamps, time_ms, side="right")) - 1
        if idx < 0:
            return math.nan
        return float(self.values[leg_id][idx])


def locf_values(
    leg: LegSeries, timestamps: np.ndarray
) -> np.ndarray:
    """LOCF sample of one leg at the given timestamps (NaN before first
    observation, resolution outcome carried after tau)."""
    if not leg.points:
        raise EmptySeriesError(f"leg {leg.leg_id} has no points")
    times = np.array([p.time_ms for p in leg.points], dtype=np.int64)
    vals = np.array([p.value for p in leg.points], dtype=np.float64)
    idx = np.searchsorted(times, timestamps, side="right") - 1
    out = np.where(idx >= 0, vals[np.clip(idx, 0, None)], np.nan)
    if leg.resolution is not None:
        out = np.where(
            timestamps >= leg.resolution.tau_ms, float(leg.resolution.outcome), out
        )
    return out


def align_series(
    legs: Sequence[LegSeries],
    grid_ms: int = DEFAULT_GRID_MS,
    start_ms: int | None = None,
    end_ms: int | None = None,
    extra_times: Sequence[int] = (),
) -> AlignedGrid:
    """Align legs on a uniform grid by carrying the last observation forward.

    The grid runs from the earliest observation (or ``start_ms``) to the
    latest observation or resolution (or ``end_ms``) in steps of ``grid_ms``;
    ``extra_times`` within the span (event times, resolution times) are
    spliced in so lookups at those instants are exact.
    """
    if grid_ms <= 0:
        raise ValueError("grid_ms must be positive")
    if not legs:
        raise EmptySeriesError("no legs to align")
    for leg in legs:
        if not leg.points:
            raise EmptySeriesError(f"leg {leg.leg_id} has no points")
    start = min(leg.first_time for leg in legs) if start_ms is None else start_ms
    end = max(leg.last_time for leg in legs) if end_ms is None else end_ms
    if end < start:
        raise ValueError("grid end precedes start")
    grid = np.arange(start, end + 1, grid_ms, dtype=np.int64)
    if grid[-1] != end:
        grid = np.append(grid, np.int64(end))
    if extra_times:
        extras = np.array(
            [t for t in extra_times if start <= t <= end], dtype=np.int64
        )
        if extras.size:
            grid = np.unique(np.concatenate([grid, extras]))
    values = {leg.leg_id: locf_values(leg, grid) for leg in legs}
    return AlignedGrid(timestamps=grid, values=values)


def validate_negrisk_group(
    group: NegRiskGroup,
    legs: Mapping[str, LegSeries],
    grid_ms: int = DEFAULT_GRID_MS,
    tol: float = DEFAULT_NEGRISK_TOL,
) -> list[SpecError]:
    """Check the sum-to-one relationship of a negRisk group on the aligned
    grid, within ``tol``. Returns the (possibly empty) list of failures."""
    errors: list[SpecError] = []
    missing = [m for m in group.members if m not in legs]
    if missing:
        for m in missing:
            errors.append(SpecError("MissingLeg", m, f"group {group.group_id} member not in data"))
        return errors
    members = [legs[m] for m in group.members]
    start = max(leg.first_time for leg in members)
    grid = align_series(members, grid_ms=grid_ms, start_ms=start)
    total = np.zeros_like(grid.timestamps, dtype=np.float64)
    for m in group.members:
        total = total + grid.values[m]
    bad = np.flatnonzero(np.abs(total - 1.0) > tol)
    if bad.size:
        t = int(grid.timestamps[bad[0]])
        errors.append(
            SpecError(
                "GroupSumViolation",
                group.group_id,
                f"member sum {total[bad[0]]:.4f} at t={t} outside 1 +/- {tol}",
            )
        )
    return errors


# ---------------------------------------------------------------------------
# Spec validation
# ---------------------------------------------------------------------------


def _require_legs(errors: list[SpecError], legs: Mapping[str, LegSeries], *ids: str):
    for leg_id in ids:
        if leg_id not in legs:
            errors.append(SpecError("MissingLeg", leg_id, "leg not present in data"))


def collect_spec_errors(
    spec: VariantSpec,
    legs: Mapping[str, LegSeries],
    groups: Sequence[NegRiskGroup] = (),
    grid_ms: int = DEFAULT_GRID_MS,
    negrisk_tol: float = DEFAULT_NEGRISK_TOL,
) -> list[SpecError]:
    """All validation failures for a variant spec against the data set."""
    errors: list[SpecError] = []

    if isinstance(spec, Conditional):
        _require_legs(errors, legs, spec.leg_a, spec.leg_b)
        if spec.joint_leg is not None:
            _require_legs(errors, legs, spec.joint_leg)
        if spec.leg_a == spec.leg_b:
            errors.append(SpecError("SameLeg", "leg_b", "conditional legs must differ"))
        if spec.denom_floor <= 0:
            errors.append(SpecError("InvalidFloor", "denom_floor", "floor must be > 0"))
        if spec.joint_leg is None and not any(
            e.code == "MissingLeg" for e in errors
        ):
            group = next(
                (g for g in groups if spec.leg_a in g.members and spec.leg_b in g.members),
                None,
            )
            if group is None:
                errors.append(
                    SpecError(
                        "MissingJointMarket",
                        "joint_leg",
                        "no joint leg and no negRisk group containing both legs",
                    )
                )
            else:
                errors.extend(validate_negrisk_group(group, legs, grid_ms, negrisk_tol))

    elif isinstance(spec, Spread):
        _require_legs(errors, legs, spec.leg_a, spec.leg_b)
        if spec.leg_a == spec.leg_b:
            errors.append(SpecError("SameLeg", "leg_b", "spread legs must differ"))

    elif isinstance(spec, Basket):
        _require_legs(errors, legs, *spec.legs)
        if not spec.legs:
            errors.append(SpecError("MissingLeg", "legs", "basket has no legs"))
        if spec.weight_rule is WeightRule.STATIC:
            w = spec.weights
            if w is None or len(w) != len(spec.legs):
                errors.append(
                    SpecError("MalformedWeights", "weights", "static weights must match leg count")
                )
            elif any(x < 0 for x in w):
                errors.append(SpecError("MalformedWeights", "weights", "weights must be >= 0"))
            elif abs(sum(w) - 1.0) > 1e-9:
                errors.append(
                    SpecError("MalformedWeights", "weights", f"weights sum to {sum(w)}, not 1")
                )
        elif spec.weights is not None:
            errors.append(
                SpecError("MalformedWeights", "weights", "weights only valid with the static rule")
            )
        if spec.weight_rule is WeightRule.VOLUME_SNAPSHOT:
            if spec.snapshot_ms is None:
                errors.append(
                    SpecError("MalformedWeights", "snapshot_ms", "volume-snapshot needs a time")
                )
            for leg_id in spec.legs:
                if leg_id in legs and legs[leg_id].volume is None:
                    errors.append(
                        SpecError("MissingMicrostructureSeries", leg_id, "volume series required")
                    )

    elif isinstance(spec, Variance):
        _require_legs(errors, legs, spec.leg)
        if spec.tick_ms <= 0 or spec.window_ms <= 0 or spec.tick_ms >= spec.window_ms:
            errors.append(
                SpecError("InvalidWindow", "tick_ms", "need 0 < tick_ms < window_ms")
            )
        elif spec.leg in legs:
            pts = legs[spec.leg].points
            if len(pts) >= 2:
                max_gap = max(
                    b.time_ms - a.time_ms for a, b in zip(pts, pts[1:])
                )
                if max_gap > spec.tick_ms:
                    errors.append(
                        SpecError(
                            "GranularityTooCoarse",
                            spec.leg,
                            f"max observation gap {max_gap}ms exceeds tick {spec.tick_ms}ms",
                        )
                    )

    elif isinstance(spec, Entropy):
        _require_legs(errors, legs, spec.leg)

    elif isinstance(spec, Liquidity):
        _require_legs(errors, legs, *spec.member_legs)
        if not spec.member_legs:
            errors.append(SpecError("MissingLeg", "member_legs", "no member legs"))
        required = {
            LiquidityMeasure.MEDIAN_HALF_SPREAD: "half_spread",
            LiquidityMeasure.DEPTH: "depth_200bps",
            LiquidityMeasure.AMIHUD: "volume",
        }[spec.measure]
        for leg_id in spec.member_legs:
            if leg_id in legs and getattr(legs[leg_id], required) is None:
                errors.append(
                    SpecError(
                        "MissingMicrostructureSeries",
                        leg_id,
                        f"{spec.measure.value} requires a {required} series",
                    )
                )

    elif isinstance(spec, Rolling):
        _require_legs(errors, legs, *spec.constituents)
        present = [c for c in spec.constituents if c in legs]
        taus = [legs[c].resolution.tau_ms for c in present if legs[c].resolution is not None]
        if len(taus) == len(spec.constituents) and any(
            b <= a for a, b in zip(taus, taus[1:])
        ):
            errors.append(
                SpecError(
                    "UnorderedConstituents",
                    "constituents",
                    "constituents must be ordered by resolution time",
                )
            )
        for i, mech in enumerate(spec.mechanisms):
            if mech.kind == "volume-weighted":
                succ = spec.constituents[i + 1]
                if succ in legs and legs[succ].volume is None:
                    errors.append(
                        SpecError(
                            "MissingVolumeSeries", succ, "volume-weighted roll needs volume data"
                        )
                    )

    elif isinstance(spec, FundingOnly):
        if spec.target is FundingTarget.DISAGREEMENT:
            errors.append(
                SpecError(
                    "UnsupportedTarget",
                    "target",
                    "disagreement-target funding requires per-trader data this engine does not ingest",
                )
            )
        _require_legs(errors, legs, spec.leg_a)
        if spec.target is FundingTarget.DIVERGENCE:
            if spec.leg_b is None:
                errors.append(SpecError("MissingLeg", "leg_b", "divergence target needs two legs"))
            else:
                _require_legs(errors, legs, spec.leg_b)
        if spec.clip[0] > 0 or spec.clip[1] < 0:
            errors.append(SpecError("InvalidClip", "clip", "need clip lo <= 0 <= hi"))
        if spec.cadence is SettlementCadence.PERIODIC and not spec.cadence_interval_ms:
            errors.append(
                SpecError("InvalidCadence", "cadence_interval_ms", "periodic cadence needs an interval")
            )

    else:  # pragma: no cover - exhaustive over VariantSpec
        errors.append(SpecError("UnknownVariant", "kind", f"unsupported spec {type(spec)}"))

    return errors


def validate_spec(
    spec: VariantSpec,
    legs: Mapping[str, LegSeries],
    groups: Sequence[NegRiskGroup] = (),
    grid_ms: int = DEFAULT_GRID_MS,
    negrisk_tol: float = DEFAULT_NEGRISK_TOL,
) -> VariantSpec:
    """Return the spec iff it validates against the data; raise
    :class:`SpecValidationError` carrying every named failure otherwise."""
    errors = collect_spec_errors(spec, legs, groups, grid_ms, negrisk_tol)
    if errors:
        raise SpecValidationError(errors)
    return spec
