"""Resolution-zone halt windows per variant policy, and rolling-contract
transitions: three roll mechanisms, three roll-basis rules, and the
complete-before-halt scheduling check.

Scheduling is pure precomputation over recorded resolutions; enforcement is
applied by the replay harness. Halts reject trader orders only: resolutions
and price updates always process, and margin breaches inside a halt still
liquidate, so the halt protocol's scope (execution risk, not terminal-jump
bad debt) stays observable in replays.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Mapping, Optional, Sequence

from .errors import MissingVolumeSeriesError, ZeroIndexError
from .model import (
    Basket,
    BasketHaltPolicy,
    Conditional,
    LegSeries,
    OrderingRule,
    Position,
    ReplayEvent,
    RollBasisRule,
    RollMechanism,
    Rolling,
    Spread,
    VariantSpec,
)

DEFAULT_RESOLUTION_ZONE_MS = 86_400_000  # one day


class HaltStage(str, enum.Enum):
    PRE_RESOLUTION = "pre-resolution"
    POST_RESOLUTION_SETTLE = "post-resolution-settle"


@dataclass(frozen=True)
class HaltWindow:
    """One trading-halt interval around a leg's resolution."""

    start_ms: int
    end_ms: int
    triggering_leg: str
    stage: HaltStage = HaltStage.PRE_RESOLUTION

    def __post_init__(self):
        if self.start_ms >= self.end_ms:
            raise ValueError("halt window must have start < end")

    def contains(self, time_ms: int) -> bool:
        return self.start_ms <= time_ms <= self.end_ms


def _merge_windows(windows: list[HaltWindow]) -> list[HaltWindow]:
    """Disjoint, sorted union: same-stage overlaps merge; a differing-stage
    window that touches the previous one gets its start shaved instead, so
    the stage tags survive."""
    if not windows:
        return []
    ordered = sorted(windows, key=lambda w: (w.start_ms, w.end_ms))
    merged = [ordered[0]]
    for w in ordered[1:]:
        last = merged[-1]
        if w.start_ms > last.end_ms:
            merged.append(w)
        elif w.stage is last.stage:
            if w.end_ms > last.end_ms:
                merged[-1] = replace(last, end_ms=w.end_ms)
        elif w.end_ms > last.end_ms:
            merged.append(replace(w, start_ms=last.end_ms + 1))
    return merged


def _window_pair(
    tau: int, zone_ms: int, leg: str, settle_lag_ms: int
) -> list[HaltWindow]:
    out = [HaltWindow(tau - zone_ms, tau, leg, HaltStage.PRE_RESOLUTION)]
    if settle_lag_ms > 0:
        out.append(
            HaltWindow(tau, tau + settle_lag_ms, leg, HaltStage.POST_RESOLUTION_SETTLE)
        )
    return out


def halt_windows(
    spec: VariantSpec,
    legs: Mapping[str, LegSeries],
    zone_ms: int = DEFAULT_RESOLUTION_ZONE_MS,
    settle_lag_ms: int = 0,
    roll_plans: Sequence["RollPlan"] = (),
) -> list[HaltWindow]:
    """Resolution-zone halt windows for a variant, merged where overlapping.

    Conditional: one window at the earlier resolution, plus a second at the
    surviving leg's resolution when the contract continues past the first.
    Spread: one window per leg. Basket: one window at the closest or the
    latest resolution depending on the halt policy. Rolling: a constituent's
    window applies only if the contract still holds it inside the zone (the
    roll did not complete first). Variance / entropy-free of schedule,
    liquidity, and funding-only variants halt nothing.
    """
    if zone_ms <= 0:
        raise ValueError("zone_ms must be positive")

    def tau(leg_id: str) -> Optional[int]:
        leg = legs.get(leg_id)
        if leg is None or leg.resolution is None:
            return None
        return leg.resolution.tau_ms

    windows: list[HaltWindow] = []

    if isinstance(spec, Conditional):
        tau_a, tau_b = tau(spec.leg_a), tau(spec.leg_b)
        known = [(t, leg) for t, leg in ((tau_a, spec.leg_a), (tau_b, spec.leg_b)) if t is not None]
        if not known:
            return []
        first_tau, first_leg = min(known)
        windows += _window_pair(first_tau, zone_ms, first_leg, settle_lag_ms)
        if tau_a is not None and tau_b is not None and tau_a != tau_b:
            later_tau, later_leg = max(known)
            continues = (
                # conditioning held: contract tracks the other leg to its tau
                (first_leg == spec.leg_b and legs[spec.leg_b].resolution.outcome == 1)
                # tracked leg first under joint-at-B: contract runs to the
                # conditioning leg's tau
                or (first_leg == spec.leg_a and spec.ordering_rule is OrderingRule.JOINT_AT_B)
            )
            if continues:
                windows += _window_pair(later_tau, zone_ms, later_leg, settle_lag_ms)

    elif isinstance(spec, Spread):
        for leg_id in (spec.leg_a, spec.leg_b):
            t = tau(leg_id)
            if t is not None:
                windows += _window_pair(t, zone_ms, leg_id, settle_lag_ms)

    elif isinstance(spec, Basket):
        taus = [(tau(leg_id), leg_id) for leg_id in spec.legs]
        known = [(t, leg_id) for t, leg_id in taus if t is not None]
        if not known:
            return []
        pick = min(known) if spec.halt_policy is BasketHaltPolicy.CLOSEST_LEG else max(known)
        windows += _window_pair(pick[0], zone_ms, pick[1], settle_lag_ms)

    elif isinstance(spec, Rolling):
        plans = {p.from_constituent: p for p in roll_plans}
        for i, leg_id in enumerate(spec.constituents):
            t = tau(leg_id)
            if t is None:
                continue
            plan = plans.get(i)
            if plan is not None and not plan.overlaps_resolution_zone:
                continue  # rolled out before the zone; no exposure to halt
            windows += _window_pair(t, zone_ms, leg_id, settle_lag_ms)

    # variance, entropy, liquidity, funding-only: nothing scheduled.

    return _merge_windows(windows)


def enforce_halt(windows: Sequence[HaltWindow], event: ReplayEvent) -> bool:
    """True iff the event may execute: trader orders inside any window are
    rejected; resolutions and price updates always pass (the underlying
    keeps moving, only trading halts)."""
    if event.kind != "trader-order":
        return True
    return not any(w.contains(event.time_ms) for w in windows)


# ---------------------------------------------------------------------------
# Rolls
# ---------------------------------------------------------------------------


def roll_weight(
    mechanism: RollMechanism,
    time_ms: int,
    cumulative_volume: float | None = None,
) -> float:
    """Successor weight lambda in [0, 1] under the configured mechanism."""
    if mechanism.kind == "cliff":
        return 0.0 if time_ms < mechanism.at_ms else 1.0
    if mechanism.kind == "linear":
        span = mechanism.end_ms - mechanism.start_ms
        lam = (time_ms - mechanism.start_ms) / span
        return min(max(lam, 0.0), 1.0)
    if cumulative_volume is None:
        raise MissingVolumeSeriesError("volume-weighted roll needs successor volume data")
    if time_ms < mechanism.start_ms:
        return 0.0
    return min(1.0, cumulative_volume / mechanism.volume_target)


def rolled_index(index_from: float, index_to: float, lam: float) -> float:
    """Convex blend of outgoing and incoming constituent indices."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")
    return (1.0 - lam) * index_from + lam * index_to


@dataclass(frozen=True)
class RollCashFlow:
    """Cash paid to (positive) or by (negative) one position at a roll."""

    position_id: int
    trader_id: str
    amount: float


def apply_roll_basis(
    positions: Sequence[Position],
    index_from: float,
    index_to: float,
    rule: RollBasisRule,
) -> list[RollCashFlow]:
    """Convert positions onto the successor index when a roll completes.

    re-anchor rescales entries by the index ratio and notionals by its
    inverse: no cash moves and unrealized PnL is preserved. maintain-notional
    leaves positions untouched; the index gap flows through unrealized PnL
    as the mark re-bases. cash-settle pays the index gap out as cash and
    shifts entries by the same gap, so a position opened at par on the
    outgoing index resumes at par on the incoming one. The two latter rules
    leave total wealth identical and differ only in the realized/unrealized
    split; all three are no-ops at zero basis.
    """
    flows: list[RollCashFlow] = []
    if rule is RollBasisRule.RE_ANCHOR:
        if index_from == 0.0 or index_to == 0.0:
            raise ZeroIndexError("cannot re-anchor entries against a zero index")
        ratio = index_to / index_from
        for p in positions:
            p.entry_price *= ratio
            p.notional /= ratio
        return flows
    if rule is RollBasisRule.MAINTAIN_NOTIONAL:
        return flows
    basis = index_to - index_from
    for p in positions:
        amount = p.side.sign * p.notional * basis
        p.entry_price += basis
        flows.append(RollCashFlow(p.position_id, p.trader_id, amount))
    return flows


@dataclass(frozen=True)
class RollPlan:
    """One scheduled transition between consecutive constituents."""

    from_constituent: int
    to_constituent: int
    mechanism: RollMechanism
    basis_rule: RollBasisRule
    start_ms: int
    completion_ms: Optional[int]  # None: never completes within the data
    overlaps_resolution_zone: bool


def _volume_completion_time(
    leg: LegSeries, start_ms: int, target: float
) -> Optional[int]:
    if leg.volume is None:
        raise MissingVolumeSeriesError(f"leg {leg.leg_id} has no volume series")
    total = 0.0
    for point, vol in zip(leg.points, leg.volume):
        if point.time_ms < start_ms:
            continue
        total += vol
        if total >= target:
            return point.time_ms
    return None


def schedule_roll(
    spec: Rolling,
    legs: Mapping[str, LegSeries],
    zone_ms: int = DEFAULT_RESOLUTION_ZONE_MS,
) -> list[RollPlan]:
    """Plan every consecutive roll under the complete-before-halt policy.

    A plan completing at or before the outgoing constituent's resolution
    zone entry is clean; otherwise the plan is flagged as overlapping, which
    keeps full jump-aware margin active on the outgoing constituent through
    the overlap (the roll provides no terminal-jump protection there).
    A flagged plan is a warning-grade outcome, not an error.
    """
    plans: list[RollPlan] = []
    for i, mech in enumerate(spec.mechanisms):
        outgoing = spec.constituents[i]
        incoming = spec.constituents[i + 1]
        if mech.kind == "cliff":
            start = mech.at_ms
            completion: Optional[int] = mech.at_ms
        elif mech.kind == "linear":
            start = mech.start_ms
            completion = mech.end_ms
        else:
            start = mech.start_ms
            completion = _volume_completion_time(
                legs[incoming], mech.start_ms, mech.volume_target
            )
        res = legs[outgoing].resolution
        if res is None:
            overlaps = False
        else:
            deadline = res.tau_ms - zone_ms
            overlaps = completion is None or completion > deadline
        plans.append(
            RollPlan(
                from_constituent=i,
                to_constituent=i + 1,
                mechanism=mech,
                basis_rule=spec.basis_rule,
                start_ms=start,
                completion_ms=completion,
                overlaps_resolution_zone=overlaps,
            )
        )
    return plans
