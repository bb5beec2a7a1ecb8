"""Contract lifecycle terminal logic: leg-resolution ordering, early
termination, residual hand-off, deterministic entropy collapse, and basket
terminal valuation.

Settlement operations mutate one :class:`ContractState`; the resolved and
terminated-early phases are absorbing. Terminal values land exactly in each
variant's discrete terminal set, with no tolerance: spread in {-1, 0, +1},
basket in the weighted outcome lattice, conditional in {0, 1}, entropy at 0.

Outcomes are always frozen before any valuation at a timestamp, so legs
resolving simultaneously settle identically in either processing order.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import AbstractSet, Optional, Sequence

import numpy as np

from .constructors import IndexSeries, weighted_sum
from .errors import EmptyWindowError, UnexpectedLegError
from .model import (
    Basket,
    Conditional,
    ContractState,
    OrderingRule,
    Phase,
    RebalanceRule,
    Resolution,
    TerminationRule,
)


class SettlementKind(str, enum.Enum):
    TERMINAL = "terminal"
    EARLY_TERMINATION = "early-termination"
    ROLL_CONVERSION = "roll-conversion"
    NONE_PERPETUAL = "none-perpetual"


@dataclass(frozen=True)
class SettlementRecord:
    """Terminal audit entry: when, how, and at what value a contract ended."""

    time_ms: int
    kind: SettlementKind
    value: float
    triggering_leg: Optional[str] = None
    rule_applied: str = ""


# ---------------------------------------------------------------------------
# TWAP
# ---------------------------------------------------------------------------


def twap(index: IndexSeries, window_end_ms: int, window_len_ms: int) -> float:
    """Time-weighted average of a piecewise-constant (LOCF) series over
    [window_end - window_len, window_end]."""
    if window_len_ms <= 0:
        raise ValueError("window length must be positive")
    start = window_end_ms - window_len_ms
    ts = index.timestamps
    if len(ts) == 0 or window_end_ms < int(ts[0]):
        raise EmptyWindowError("window lies before the first observation")
    lo = max(start, int(ts[0]))
    if lo >= window_end_ms:
        # Window clips to a single instant at/after the first observation.
        return index.value_at(window_end_ms)
    cut = np.searchsorted(ts, lo, side="right") - 1
    hi_cut = np.searchsorted(ts, window_end_ms, side="left")
    seg_times = [lo] + [int(t) for t in ts[cut + 1 : hi_cut]] + [window_end_ms]
    total = 0.0
    weight = 0.0
    for a, b in zip(seg_times, seg_times[1:]):
        if b <= a:
            continue
        total += index.value_at(a) * (b - a)
        weight += b - a
    if weight <= 0:
        raise EmptyWindowError("degenerate averaging window")
    return total / weight


def _termination_value(rule: TerminationRule, index: IndexSeries, at_ms: int) -> float:
    if rule.kind == "fixed":
        return float(rule.value)
    if rule.kind == "last-tick":
        return index.value_at(at_ms)
    return twap(index, at_ms, int(rule.window_ms))


# ---------------------------------------------------------------------------
# Conditional
# ---------------------------------------------------------------------------


@dataclass
class ConditionalLifecycle:
    """Freeze-time bookkeeping for a conditional pair; freeze order decides
    which settlement clause applies."""

    spec: Conditional
    freeze_times: dict[str, int] = field(default_factory=dict)


def settle_conditional(
    state: ContractState,
    event: Resolution,
    lifecycle: ConditionalLifecycle,
    index: IndexSeries,
    pending_same_time: AbstractSet[str] = frozenset(),
) -> Optional[SettlementRecord]:
    """Process one leg resolution of a conditional contract.

    The conditioning leg resolving NO ends the contract at the configured
    termination value; resolving YES hands tracking to the tracked leg,
    which later collapses to its outcome. A tracked-leg resolution arriving
    strictly first either settles immediately (settle-at-A) or freezes the
    outcome until the conditioning leg resolves, settling at the joint
    outcome (joint-at-B). ``pending_same_time`` names legs with resolutions
    at this same timestamp not yet processed; valuation defers until the
    last of them so the result is arrival-order independent.
    """
    spec = lifecycle.spec
    if event.leg_id not in (spec.leg_a, spec.leg_b):
        raise UnexpectedLegError(f"leg {event.leg_id} is not part of the conditional")
    if state.settled:
        return None
    state.freeze_leg(event.leg_id, event.record.outcome)
    lifecycle.freeze_times.setdefault(event.leg_id, event.time_ms)

    other = spec.leg_b if event.leg_id == spec.leg_a else spec.leg_a
    if other in pending_same_time:
        return None  # freeze first; the co-resolution completes settlement

    outcome_a = state.frozen_legs.get(spec.leg_a)
    outcome_b = state.frozen_legs.get(spec.leg_b)
    a_time = lifecycle.freeze_times.get(spec.leg_a)
    b_time = lifecycle.freeze_times.get(spec.leg_b)

    if outcome_b is None:
        # Only the tracked leg has resolved, strictly before the conditioning one.
        if spec.ordering_rule is OrderingRule.SETTLE_AT_A:
            state.transition(Phase.RESOLVED)
            return SettlementRecord(
                event.time_ms,
                SettlementKind.TERMINAL,
                float(outcome_a),
                triggering_leg=spec.leg_a,
                rule_applied="settle-at-A",
            )
        return None  # joint-at-B: outcome frozen, wait for the conditioning leg

    if outcome_a is not None and a_time < b_time:
        # Tracked leg resolved strictly first under joint-at-B: joint outcome.
        state.transition(Phase.RESOLVED)
        return SettlementRecord(
            event.time_ms,
            SettlementKind.TERMINAL,
            float(outcome_a * outcome_b),
            triggering_leg=spec.leg_b,
            rule_applied="joint-at-B",
        )

    if outcome_b == 0:
        # Conditioning event failed at or before the tracked leg's resolution.
        value = _termination_value(spec.termination_rule, index, event.time_ms)
        state.transition(Phase.TERMINATED_EARLY)
        return SettlementRecord(
            event.time_ms,
            SettlementKind.EARLY_TERMINATION,
            value,
            triggering_leg=spec.leg_b,
            rule_applied=spec.termination_rule.kind,
        )

    if outcome_a is not None:
        # Conditioning held and the tracked outcome is known: collapse now.
        state.transition(Phase.RESOLVED)
        return SettlementRecord(
            event.time_ms,
            SettlementKind.TERMINAL,
            float(outcome_a),
            triggering_leg=event.leg_id,
            rule_applied="pass-through",
        )
    return None  # conditioning held YES; keep tracking the tracked leg


# ---------------------------------------------------------------------------
# Spread
# ---------------------------------------------------------------------------


def settle_spread(
    state: ContractState,
    event: Resolution,
    leg_a: str,
    leg_b: str,
) -> Optional[SettlementRecord]:
    """First resolution freezes that side and switches tracking to the
    residual; the second emits the terminal difference in {-1, 0, +1}."""
    if event.leg_id not in (leg_a, leg_b):
        raise UnexpectedLegError(f"leg {event.leg_id} is not part of the spread")
    if state.settled:
        return None
    state.freeze_leg(event.leg_id, event.record.outcome)
    ra = state.frozen_legs.get(leg_a)
    rb = state.frozen_legs.get(leg_b)
    if ra is None or rb is None:
        return None
    state.transition(Phase.RESOLVED)
    return SettlementRecord(
        event.time_ms,
        SettlementKind.TERMINAL,
        float(ra - rb),
        triggering_leg=event.leg_id,
        rule_applied="residual-collapse",
    )


# ---------------------------------------------------------------------------
# Basket
# ---------------------------------------------------------------------------


@dataclass
class BasketLifecycle:
    """Weight bookkeeping for a basket across its resolution cascade."""

    spec: Basket
    original_weights: tuple[float, ...]
    current_weights: tuple[float, ...]

    @classmethod
    def start(cls, spec: Basket, weights: Sequence[float]) -> "BasketLifecycle":
        w = tuple(float(x) for x in weights)
        return cls(spec=spec, original_weights=w, current_weights=w)


def settle_basket(
    state: ContractState,
    event: Resolution,
    lifecycle: BasketLifecycle,
) -> Optional[SettlementRecord]:
    """Freeze the resolving leg; once all legs are frozen, emit the terminal
    weighted outcome.

    Under no-rebalance the terminal value uses the original weights; under
    drop-on-resolution every prior resolution renormalized the survivors, so
    the terminal reflects the realized cascade. Weight updates themselves
    (and their discontinuity records) are applied by the caller via
    :func:`eventperp.constructors.rebalance_weights`.
    """
    spec = lifecycle.spec
    if event.leg_id not in spec.legs:
        raise UnexpectedLegError(f"leg {event.leg_id} is not a basket member")
    if state.settled:
        return None
    state.freeze_leg(event.leg_id, event.record.outcome)
    if any(leg not in state.frozen_legs for leg in spec.legs):
        return None
    outcomes = [float(state.frozen_legs[leg]) for leg in spec.legs]
    if spec.rebalance_rule is RebalanceRule.NONE:
        value = weighted_sum(lifecycle.original_weights, outcomes)
        rule = "no-rebalance"
    else:
        value = weighted_sum(lifecycle.current_weights, outcomes)
        rule = "drop-on-resolution"
    state.transition(Phase.RESOLVED)
    return SettlementRecord(
        event.time_ms,
        SettlementKind.TERMINAL,
        value,
        triggering_leg=event.leg_id,
        rule_applied=rule,
    )


# ---------------------------------------------------------------------------
# Entropy
# ---------------------------------------------------------------------------


def settle_entropy(
    state: ContractState, event: Resolution, leg: str
) -> SettlementRecord:
    """Entropy collapses to exactly zero at resolution, whichever way the
    underlying event resolves."""
    if event.leg_id != leg:
        raise UnexpectedLegError(f"leg {event.leg_id} is not the entropy leg")
    state.freeze_leg(event.leg_id, event.record.outcome)
    state.transition(Phase.RESOLVED)
    return SettlementRecord(
        event.time_ms,
        SettlementKind.TERMINAL,
        0.0,
        triggering_leg=leg,
        rule_applied="entropy-collapse",
    )


def basket_terminal_set(weights: Sequence[float]) -> list[float]:
    """All weighted outcome-vector sums, in the same summation order the
    settlement path uses; terminal values must be exact members."""
    k = len(weights)
    out = []
    for mask in range(2**k):
        outcomes = [(mask >> i) & 1 for i in range(k)]
        out.append(weighted_sum(weights, [float(v) for v in outcomes]))
    return out
