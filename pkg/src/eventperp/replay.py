"""Event-driven deterministic replay: merges recorded legs into one ordered
event stream, drives the contract index, risk engine, halts, rolls, and
settlement, and emits a full audit report.

One replay is strictly single-threaded; identical (spec, data, config)
inputs produce identical reports. Cash moves double-entry between trader
accounts, a position-margin pool, and a venue account, so the closed
identity

    sum(trader cash deltas) + venue equity delta + bad debt = 0

holds on every run, where venue equity is venue cash minus written-off
claims (the bad debt).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence

import numpy as np

from .constructors import DiscontinuityRecord, IndexSeries
from .indexing import ContractIndex, build_contract_index
from .model import (
    Basket,
    Conditional,
    ContractState,
    Entropy,
    FundingOnly,
    FundingTarget,
    FundingTick,
    LegSeries,
    Liquidity,
    NegRiskGroup,
    Phase,
    Position,
    PriceUpdate,
    RebalanceRule,
    Resolution,
    ReplayEvent,
    RollBasisRule,
    RollCheckpoint,
    Rolling,
    SettlementCadence,
    Side,
    Spread,
    TraderOrder,
    VariantSpec,
    Variance,
    sort_events,
    validate_spec,
)
from .risk import (
    RiskConfig,
    accrue_funding,
    check_liquidation,
    funding_rate,
    jump_magnitude_basket,
    jump_magnitude_single,
    jump_magnitude_spread,
    maintenance_margin,
    max_leverage,
)
from .scheduling import (
    DEFAULT_RESOLUTION_ZONE_MS,
    HaltWindow,
    apply_roll_basis,
    halt_windows,
)
from .settlement import (
    BasketLifecycle,
    ConditionalLifecycle,
    SettlementKind,
    SettlementRecord,
    settle_basket,
    settle_conditional,
    settle_entropy,
    settle_spread,
)
from .synth import ou_overlay

VENUE_ACCOUNT = "__venue__"
POSITION_POOL = "__positions__"

#: Variants whose introduction would feed back into the markets composing
#: their underlying; replay results for them are pass-through and stamped.
REFLEXIVITY_CAVEAT = "REFLEXIVITY-CAVEAT"


class ReportGranularity(str, enum.Enum):
    TICK = "tick"
    SUMMARY = "summary"


@dataclass(frozen=True)
class MarkOverlay:
    """Synthetic mark-basis process added to the index: zero keeps the mark
    pinned to the index; ou is a seeded mean-reverting overlay."""

    kind: str = "zero"  # zero | ou
    scale: float = 0.01
    mean_reversion: float = 0.05

    def __post_init__(self):
        if self.kind not in ("zero", "ou"):
            raise ValueError(f"unknown mark overlay {self.kind!r}")


@dataclass(frozen=True)
class SyntheticTraders:
    """Seeded scripted population: ``count`` orders at uniform times over
    [start_ms, end_ms], sides drawn with ``long_fraction`` probability.
    An alternative to hand-written scripts, fully determined by the seed."""

    count: int
    notional: float = 100.0
    leverage: float = 2.0
    long_fraction: float = 0.5
    start_ms: int = 0
    end_ms: int = 0

    def orders(self, seed: int, first_ms: int, last_ms: int) -> tuple[TraderOrder, ...]:
        rng = np.random.default_rng((seed * 2_147_483_629 + 11) % (2**63))
        start = self.start_ms or first_ms
        end = self.end_ms or last_ms
        times = np.sort(rng.integers(start, max(end, start + 1), size=self.count))
        sides = rng.uniform(0, 1, size=self.count) < self.long_fraction
        return tuple(
            TraderOrder(
                time_ms=int(t),
                trader_id=f"synth{i}",
                side=Side.LONG if is_long else Side.SHORT,
                notional=self.notional,
                leverage=self.leverage,
            )
            for i, (t, is_long) in enumerate(zip(times, sides))
        )


@dataclass(frozen=True)
class ReplayConfig:
    grid_ms: int = 1000
    seed: int = 0
    trader_script: tuple[TraderOrder, ...] = ()
    synthetic_traders: Optional[SyntheticTraders] = None
    risk: RiskConfig = field(default_factory=RiskConfig)
    halt_enabled: bool = True
    zone_ms: int = DEFAULT_RESOLUTION_ZONE_MS
    settle_lag_ms: int = 0
    report_granularity: ReportGranularity = ReportGranularity.TICK
    mark_overlay: MarkOverlay = field(default_factory=MarkOverlay)


@dataclass(frozen=True)
class LiquidationEvent:
    time_ms: int
    trader_id: str
    position_id: int
    fill_price: float
    returned: float
    bad_debt: float


@dataclass(frozen=True)
class OrderOutcome:
    time_ms: int
    trader_id: str
    accepted: bool
    reason: str = ""
    position_id: int = -1
    entry_price: Optional[float] = None
    in_halt_window: bool = False


@dataclass(frozen=True)
class RollEvent:
    time_ms: int
    from_constituent: int
    to_constituent: int
    basis_rule: str
    index_from: float
    index_to: float
    cash_flows: tuple[tuple[str, float], ...] = ()


@dataclass
class ReplayReport:
    """Full audit of one replay run."""

    variant_kind: str
    seed: int
    grid_ms: int
    caveats: list[str] = field(default_factory=list)
    incomplete: bool = False
    error: Optional[str] = None

    index_times: list[int] = field(default_factory=list)
    index_values: list[float] = field(default_factory=list)
    mark_values: list[float] = field(default_factory=list)
    funding_ticks: list[tuple[int, float]] = field(default_factory=list)

    settlement: Optional[SettlementRecord] = None
    liquidations: list[LiquidationEvent] = field(default_factory=list)
    bad_debt_total: float = 0.0
    halt_windows: list[HaltWindow] = field(default_factory=list)
    floor_halts: list[tuple[int, int]] = field(default_factory=list)
    orders: list[OrderOutcome] = field(default_factory=list)
    roll_events: list[RollEvent] = field(default_factory=list)
    discontinuities: list[DiscontinuityRecord] = field(default_factory=list)

    trader_cash: dict[str, float] = field(default_factory=dict)
    venue_cash: float = 0.0
    funding_transfer_residuals: list[float] = field(default_factory=list)

    @property
    def executed_orders(self) -> list[OrderOutcome]:
        return [o for o in self.orders if o.accepted]

    @property
    def rejected_orders(self) -> list[OrderOutcome]:
        return [o for o in self.orders if not o.accepted]

    @property
    def in_window_executions(self) -> int:
        return sum(1 for o in self.executed_orders if o.in_halt_window)

    @property
    def venue_equity(self) -> float:
        return self.venue_cash - self.bad_debt_total

    @property
    def conservation_residual(self) -> float:
        """sum(trader cash) + venue equity + bad debt; zero when books close."""
        total = 0.0
        for _, v in sorted(self.trader_cash.items()):
            total += v
        return total + self.venue_equity + self.bad_debt_total


class _Accounts:
    """Double-entry cash: every movement debits one account and credits
    another with the same float, so the grand total stays exactly zero."""

    def __init__(self):
        self.balances: dict[str, float] = {}

    def transfer(self, src: str, dst: str, amount: float) -> None:
        self.balances[src] = self.balances.get(src, 0.0) - amount
        self.balances[dst] = self.balances.get(dst, 0.0) + amount


@dataclass
class _Engine:
    """Mutable replay context threading the submodules together."""

    spec: VariantSpec
    config: ReplayConfig
    contract: ContractIndex
    legs: Mapping[str, LegSeries]
    report: ReplayReport
    mark_series: IndexSeries
    state: ContractState = field(default_factory=ContractState)
    accounts: _Accounts = field(default_factory=_Accounts)
    next_position_id: int = 0
    basket_lifecycle: Optional[BasketLifecycle] = None
    conditional_lifecycle: Optional[ConditionalLifecycle] = None
    active_constituent: int = 0
    completed_rolls: set = field(default_factory=set)
    last_periodic_flush: Optional[int] = None


def _involved_leg_ids(spec: VariantSpec) -> list[str]:
    if isinstance(spec, Conditional):
        ids = [spec.leg_a, spec.leg_b]
        if spec.joint_leg:
            ids.append(spec.joint_leg)
        return ids
    if isinstance(spec, Spread):
        return [spec.leg_a, spec.leg_b]
    if isinstance(spec, Basket):
        return list(spec.legs)
    if isinstance(spec, Rolling):
        return list(spec.constituents)
    if isinstance(spec, FundingOnly):
        return [spec.leg_a] + ([spec.leg_b] if spec.leg_b else [])
    if isinstance(spec, Liquidity):
        return list(spec.member_legs)
    return [spec.leg]  # variance, entropy


def _basis_seed(seed: int) -> int:
    return (seed * 1_000_003 + 7) % (2**63)


def _build_mark_series(contract: ContractIndex, config: ReplayConfig) -> IndexSeries:
    base = contract.series
    if config.mark_overlay.kind == "zero":
        values = base.values.copy()
    else:
        overlay = ou_overlay(
            config.seed,
            base.timestamps,
            scale=config.mark_overlay.scale,
            mean_reversion=config.mark_overlay.mean_reversion,
        )
        values = base.values + overlay
        lo, hi = base.support
        if math.isfinite(lo):
            values = np.maximum(values, lo)
        if math.isfinite(hi):
            values = np.minimum(values, hi)
    return IndexSeries(base.timestamps, values, base.support, base.provenance + "-mark")


def _funding_only_index(
    spec: FundingOnly, contract: ContractIndex, config: ReplayConfig
) -> ContractIndex:
    """Basis-target contracts track the constituent's synthetic mark basis
    (there is no recorded mark for the constituent market); the divergence
    target is computed from recorded mids and passes through unchanged."""
    if spec.target is not FundingTarget.BASIS:
        return contract
    base = contract.series
    if config.mark_overlay.kind == "zero":
        values = np.zeros_like(base.values)
    else:
        values = ou_overlay(
            _basis_seed(config.seed),
            base.timestamps,
            scale=config.mark_overlay.scale,
            mean_reversion=config.mark_overlay.mean_reversion,
        )
    series = IndexSeries(base.timestamps, values, base.support, base.provenance)
    return replace(contract, series=series)


# ---------------------------------------------------------------------------
# Risk context per variant
# ---------------------------------------------------------------------------


def _time_to_closest_tau(engine: _Engine, time_ms: int) -> float:
    spec = engine.spec
    if isinstance(spec, (Variance, Liquidity, FundingOnly)):
        return math.inf
    if isinstance(spec, Rolling):
        leg_id = spec.constituents[engine.active_constituent]
        leg = engine.legs[leg_id]
        if leg.resolution is None or leg_id in engine.state.frozen_legs:
            return math.inf
        return max(leg.resolution.tau_ms - time_ms, 0.0)
    taus = []
    for leg_id in _involved_leg_ids(spec):
        leg = engine.legs.get(leg_id)
        if leg is None or leg.resolution is None or leg_id in engine.state.frozen_legs:
            continue
        taus.append(leg.resolution.tau_ms)
    if not taus:
        return math.inf
    return max(min(taus) - time_ms, 0.0)


def _spread_simultaneous(engine: _Engine) -> bool:
    override = engine.config.risk.spread_simultaneous
    if override is not None:
        return override
    spec = engine.spec
    ra = engine.legs[spec.leg_a].resolution
    rb = engine.legs[spec.leg_b].resolution
    if ra is None or rb is None:
        return False
    return abs(ra.tau_ms - rb.tau_ms) <= engine.config.grid_ms


def _jump_magnitude(engine: _Engine, time_ms: int, side: Side, index_value: float) -> float:
    spec = engine.spec
    state = engine.state
    if isinstance(spec, Conditional):
        return jump_magnitude_single(index_value, side)
    if isinstance(spec, Spread):
        a = engine.contract.leg_value_at(spec.leg_a, time_ms)
        b = engine.contract.leg_value_at(spec.leg_b, time_ms)
        return jump_magnitude_spread(
            a,
            b,
            side,
            frozen_a=state.frozen_legs.get(spec.leg_a),
            frozen_b=state.frozen_legs.get(spec.leg_b),
            simultaneous=_spread_simultaneous(engine),
        )
    if isinstance(spec, Basket):
        values = [engine.contract.leg_value_at(i, time_ms) for i in spec.legs]
        weights = engine.contract.weights_at(time_ms)
        frozen = {
            idx: state.frozen_legs[leg_id]
            for idx, leg_id in enumerate(spec.legs)
            if leg_id in state.frozen_legs
        }
        return jump_magnitude_basket(
            values, weights, side, frozen, engine.config.risk.margin.aggregation
        )
    if isinstance(spec, Rolling):
        leg_id = spec.constituents[engine.active_constituent]
        if leg_id in state.frozen_legs:
            return 0.0
        return jump_magnitude_single(engine.contract.leg_value_at(leg_id, time_ms), side)
    return 0.0  # variance, entropy, liquidity, funding-only


def _live_leg_values(engine: _Engine, time_ms: int) -> list[float]:
    spec = engine.spec
    if not isinstance(spec, Spread):
        return []
    return [
        engine.contract.leg_value_at(leg_id, time_ms)
        for leg_id in (spec.leg_a, spec.leg_b)
        if leg_id not in engine.state.frozen_legs
    ]


# ---------------------------------------------------------------------------
# Cash mechanics
# ---------------------------------------------------------------------------


def _close_position(engine: _Engine, position: Position, fill: float) -> tuple[float, float]:
    """Close at fill. The position's held value (margin plus any buffered
    funding) dissolves to the venue; the venue pays the trader their
    entitlement floored at zero; any shortfall is written off as bad debt."""
    buffered = engine.state.accrued_funding.pop(position.position_id, 0.0)
    held = position.margin_posted + buffered
    entitled = held + position.unrealized_pnl(fill)
    payout = max(0.0, entitled)
    bad_debt = max(0.0, -entitled)
    engine.accounts.transfer(POSITION_POOL, VENUE_ACCOUNT, held)
    engine.accounts.transfer(VENUE_ACCOUNT, position.trader_id, payout)
    engine.state.positions.remove(position)
    engine.report.bad_debt_total += bad_debt
    return payout, bad_debt


def _liquidation_sweep(engine: _Engine, time_ms: int, index: float, mark: float) -> None:
    if engine.state.settled or math.isnan(mark):
        return
    cfg = engine.config
    tt = _time_to_closest_tau(engine, time_ms)
    for position in list(engine.state.positions):
        jump = _jump_magnitude(engine, time_ms, position.side, index)
        maintenance = maintenance_margin(position.notional, jump, cfg.risk.margin, tt)
        buffered = engine.state.accrued_funding.get(position.position_id, 0.0)
        result = check_liquidation(
            position,
            mark,
            index,
            maintenance,
            cfg.risk.liquidation_slippage,
            extra_collateral=buffered,
        )
        if not result.liquidate:
            continue
        payout, bad_debt = _close_position(engine, position, result.fill_price)
        engine.report.liquidations.append(
            LiquidationEvent(
                time_ms=time_ms,
                trader_id=position.trader_id,
                position_id=position.position_id,
                fill_price=result.fill_price,
                returned=payout,
                bad_debt=bad_debt,
            )
        )


def _settle_all_positions(engine: _Engine, record: SettlementRecord) -> None:
    for position in list(engine.state.positions):
        _close_position(engine, position, record.value)


# ---------------------------------------------------------------------------
# The replay
# ---------------------------------------------------------------------------


def replay(
    spec: VariantSpec,
    legs: Mapping[str, LegSeries],
    config: ReplayConfig,
    groups: Sequence[NegRiskGroup] = (),
) -> ReplayReport:
    """Run one full deterministic lifecycle replay and return the report."""
    validate_spec(spec, legs, groups, config.grid_ms)

    contract = build_contract_index(
        spec, legs, groups, grid_ms=config.grid_ms, validate=False, zone_ms=config.zone_ms
    )
    if isinstance(spec, FundingOnly):
        contract = _funding_only_index(spec, contract, config)
    mark_series = _build_mark_series(contract, config)

    windows = halt_windows(
        spec,
        legs,
        zone_ms=config.zone_ms,
        settle_lag_ms=config.settle_lag_ms,
        roll_plans=contract.roll_plans,
    )

    report = ReplayReport(
        variant_kind=spec.kind,
        seed=config.seed,
        grid_ms=config.grid_ms,
        halt_windows=windows,
        floor_halts=list(contract.floor_halts),
        discontinuities=list(contract.discontinuities),
    )
    if isinstance(spec, (Liquidity, FundingOnly)):
        report.caveats.append(REFLEXIVITY_CAVEAT)

    engine = _Engine(
        spec=spec,
        config=config,
        contract=contract,
        legs=legs,
        report=report,
        mark_series=mark_series,
    )
    if isinstance(spec, Basket):
        engine.basket_lifecycle = BasketLifecycle.start(spec, contract.weights_timeline[0][1])
    if isinstance(spec, Conditional):
        engine.conditional_lifecycle = ConditionalLifecycle(spec=spec)

    try:
        _run_events(engine, _assemble_events(engine))
    except Exception as exc:  # noqa: BLE001 - abort yields a partial report
        report.incomplete = True
        report.error = f"{type(exc).__name__}: {exc}"

    _finalize(engine)
    return report


def _assemble_events(engine: _Engine) -> list[ReplayEvent]:
    config, legs = engine.config, engine.legs
    involved = _involved_leg_ids(engine.spec)
    first = int(engine.contract.series.timestamps[0])
    last = int(engine.contract.grid.timestamps[-1])
    events: list[ReplayEvent] = []
    for leg_id in involved:
        for point in legs[leg_id].points:
            if point.time_ms >= first:
                events.append(PriceUpdate(point.time_ms, leg_id, point))
        res = legs[leg_id].resolution
        if res is not None and res.tau_ms >= first:
            events.append(Resolution(res.tau_ms, leg_id, res))
    interval = config.risk.funding.interval_ms
    for t in range(first + interval, last + 1, interval):
        events.append(FundingTick(t))
    for plan in engine.contract.roll_plans:
        if plan.completion_ms is not None and first <= plan.completion_ms <= last:
            events.append(RollCheckpoint(plan.completion_ms))
    events.extend(config.trader_script)
    if config.synthetic_traders is not None:
        events.extend(config.synthetic_traders.orders(config.seed, first, last))
    return sort_events(events)


def _run_events(engine: _Engine, events: list[ReplayEvent]) -> None:
    report = engine.report
    state = engine.state
    pending_resolutions: dict[int, set] = {}
    for e in events:
        if e.kind == "resolution":
            pending_resolutions.setdefault(e.time_ms, set()).add(e.leg_id)

    in_scheduled_halt = False
    for event in events:
        t = event.time_ms
        index = engine.contract.value_at(t)
        mark = engine.mark_series.value_at(t)
        state.underlying = index
        state.mark = mark

        if not state.settled and engine.config.halt_enabled:
            in_halt = any(w.contains(t) for w in report.halt_windows)
            if in_halt != in_scheduled_halt:
                state.transition(Phase.HALTED if in_halt else Phase.ACTIVE)
                in_scheduled_halt = in_halt

        if event.kind == "resolution":
            # The index at t already reflects the frozen outcome, so the
            # sweep runs against the post-jump value: positions the jump
            # pushed through maintenance liquidate at the post-jump index
            # before any terminal close (terminal-jump bad debt is booked
            # as a liquidation, not silently settled away).
            _liquidation_sweep(engine, t, index, mark)
            pending_resolutions[t].discard(event.leg_id)
            record = _handle_resolution(engine, event, pending_resolutions.get(t, set()))
            if record is not None:
                report.settlement = record
                _settle_all_positions(engine, record)

        elif event.kind == "price-update":
            _liquidation_sweep(engine, t, index, mark)

        elif event.kind == "roll-checkpoint":
            _handle_roll_completion(engine, t)
            _liquidation_sweep(engine, t, engine.contract.value_at(t), engine.mark_series.value_at(t))

        elif event.kind == "funding-tick":
            if not state.settled:
                _handle_funding(engine, t, index, mark)
                _liquidation_sweep(engine, t, index, mark)

        elif event.kind == "trader-order":
            _handle_order(engine, event, t, index, mark)


def _handle_resolution(
    engine: _Engine, event: Resolution, pending_same_time: set
) -> Optional[SettlementRecord]:
    spec = engine.spec
    state = engine.state
    if isinstance(spec, Conditional):
        if event.leg_id == spec.joint_leg:
            state.freeze_leg(event.leg_id, event.record.outcome)
            return None
        routed = event
        if spec.joint_leg is None and event.leg_id == spec.leg_b:
            # Mutually exclusive pair: the conditioning event is the
            # complement of leg_b, so its outcome inverts.
            routed = Resolution(
                event.time_ms,
                event.leg_id,
                replace(event.record, outcome=1 - event.record.outcome),
            )
        return settle_conditional(
            state,
            routed,
            engine.conditional_lifecycle,
            engine.contract.series,
            pending_same_time=pending_same_time & {spec.leg_a, spec.leg_b},
        )
    if isinstance(spec, Spread):
        return settle_spread(state, event, spec.leg_a, spec.leg_b)
    if isinstance(spec, Basket):
        lifecycle = engine.basket_lifecycle
        record = settle_basket(state, event, lifecycle)
        if record is None and spec.rebalance_rule is RebalanceRule.DROP_ON_RESOLUTION:
            lifecycle.current_weights = engine.contract.weights_at(event.time_ms)
        return record
    if isinstance(spec, Rolling):
        state.freeze_leg(event.leg_id, event.record.outcome)
        if event.leg_id == spec.constituents[engine.active_constituent]:
            roll_pending = any(
                p.from_constituent == engine.active_constituent
                and p.completion_ms is not None
                and p.completion_ms > event.time_ms
                for p in engine.contract.roll_plans
            )
            if not roll_pending:
                state.transition(Phase.RESOLVED)
                return SettlementRecord(
                    event.time_ms,
                    SettlementKind.TERMINAL,
                    float(event.record.outcome),
                    triggering_leg=event.leg_id,
                    rule_applied="constituent-collapse",
                )
        return None
    if isinstance(spec, Entropy):
        if event.leg_id == spec.leg:
            return settle_entropy(state, event, spec.leg)
        return None
    # variance, liquidity, funding-only: per-leg outcomes freeze but the
    # contract never settles on them.
    state.freeze_leg(event.leg_id, event.record.outcome)
    return None


def _handle_roll_completion(engine: _Engine, time_ms: int) -> None:
    spec = engine.spec
    if not isinstance(spec, Rolling) or engine.state.settled:
        return
    for plan in engine.contract.roll_plans:
        if plan.completion_ms != time_ms or plan.from_constituent in engine.completed_rolls:
            continue
        if plan.from_constituent != engine.active_constituent:
            continue
        out_leg = spec.constituents[plan.from_constituent]
        in_leg = spec.constituents[plan.to_constituent]
        index_from = engine.contract.leg_value_at(out_leg, time_ms)
        index_to = engine.contract.leg_value_at(in_leg, time_ms)
        basis_rule = plan.basis_rule
        if basis_rule is RollBasisRule.RE_ANCHOR and (index_from == 0.0 or index_to == 0.0):
            # Entry rescaling is undefined against a zero index (a roll that
            # completed after its constituent collapsed); fall back to the
            # basis-preserving cash conversion, which has no singularity.
            basis_rule = RollBasisRule.CASH_SETTLE
        flows = apply_roll_basis(engine.state.positions, index_from, index_to, basis_rule)
        flow_pairs = []
        for f in flows:
            # Realized roll PnL settles in cash against the venue.
            engine.accounts.transfer(VENUE_ACCOUNT, f.trader_id, f.amount)
            flow_pairs.append((f.trader_id, f.amount))
        engine.completed_rolls.add(plan.from_constituent)
        engine.active_constituent = plan.to_constituent
        engine.state.active_constituent = plan.to_constituent
        engine.report.roll_events.append(
            RollEvent(
                time_ms=time_ms,
                from_constituent=plan.from_constituent,
                to_constituent=plan.to_constituent,
                basis_rule=basis_rule.value,
                index_from=index_from,
                index_to=index_to,
                cash_flows=tuple(flow_pairs),
            )
        )


def _handle_funding(engine: _Engine, t: int, index: float, mark: float) -> None:
    spec = engine.spec
    params = engine.config.risk.funding
    if isinstance(spec, FundingOnly):
        params = replace(params, clip=spec.clip)
    rate = funding_rate(
        mark, index, params, spec.kind, live_leg_values=_live_leg_values(engine, t)
    )
    engine.report.funding_ticks.append((t, rate))
    if rate == 0.0 or not engine.state.positions:
        return
    transfers = accrue_funding(engine.state.positions, rate)
    if not transfers:
        return
    residual = 0.0
    for tr in transfers:
        residual += tr.amount
    engine.report.funding_transfer_residuals.append(residual)

    cadence = spec.cadence if isinstance(spec, FundingOnly) else SettlementCadence.CONTINUOUS
    positions_by_id = {p.position_id: p for p in engine.state.positions}
    if cadence is SettlementCadence.CONTINUOUS:
        for tr in transfers:
            positions_by_id[tr.position_id].margin_posted += tr.amount
        return
    buf = engine.state.accrued_funding
    for tr in transfers:
        buf[tr.position_id] = buf.get(tr.position_id, 0.0) + tr.amount
    if cadence is SettlementCadence.PERIODIC:
        if engine.last_periodic_flush is None:
            engine.last_periodic_flush = int(engine.contract.series.timestamps[0])
        if t - engine.last_periodic_flush >= spec.cadence_interval_ms:
            for pid, amount in list(buf.items()):
                if pid in positions_by_id:
                    positions_by_id[pid].margin_posted += amount
                    buf[pid] = 0.0
            engine.last_periodic_flush = t
    # on-close: buffers settle when the position closes.


def _handle_order(
    engine: _Engine, event: TraderOrder, t: int, index: float, mark: float
) -> None:
    report = engine.report
    state = engine.state

    def reject(reason: str) -> None:
        report.orders.append(OrderOutcome(t, event.trader_id, accepted=False, reason=reason))

    if state.settled:
        reject("contract-settled")
        return
    in_window = any(w.contains(t) for w in report.halt_windows) or any(
        s <= t <= e for s, e in report.floor_halts
    )
    if engine.config.halt_enabled and in_window:
        reject("trading-halt")
        return
    if event.leverage <= 0 or event.notional <= 0:
        reject("malformed-order")
        return
    tt = _time_to_closest_tau(engine, t)
    cap = max_leverage(tt, engine.config.risk.leverage, engine.config.zone_ms)
    if event.leverage > cap:
        reject("leverage-cap")
        return
    if math.isnan(mark):
        reject("no-mark")
        return
    margin = event.notional / event.leverage
    jump = _jump_magnitude(engine, t, event.side, index)
    maintenance = maintenance_margin(event.notional, jump, engine.config.risk.margin, tt)
    if margin < maintenance:
        reject("insufficient-initial-margin")
        return

    position = Position(
        trader_id=event.trader_id,
        side=event.side,
        notional=event.notional,
        entry_price=mark,
        margin_posted=margin,
        open_time=t,
        position_id=engine.next_position_id,
    )
    engine.next_position_id += 1
    engine.accounts.transfer(event.trader_id, POSITION_POOL, margin)
    state.positions.append(position)
    report.orders.append(
        OrderOutcome(
            t,
            event.trader_id,
            accepted=True,
            position_id=position.position_id,
            entry_price=mark,
            in_halt_window=in_window,
        )
    )


def _finalize(engine: _Engine) -> None:
    report = engine.report
    state = engine.state

    if report.settlement is None and not report.incomplete:
        # Perpetual or data-bounded run: close any open book at the last mark.
        last_t = int(engine.contract.series.timestamps[-1])
        report.settlement = SettlementRecord(
            last_t,
            SettlementKind.NONE_PERPETUAL,
            float(engine.contract.series.values[-1]),
            rule_applied="data-end",
        )
        last_mark = engine.mark_series.value_at(last_t)
        for position in list(state.positions):
            _close_position(engine, position, last_mark)
    elif report.settlement is not None and state.positions:
        _settle_all_positions(engine, report.settlement)

    if engine.config.report_granularity is ReportGranularity.TICK:
        report.index_times = [int(t) for t in engine.contract.series.timestamps]
        report.index_values = [float(v) for v in engine.contract.series.values]
        report.mark_values = [float(v) for v in engine.mark_series.values]

    balances = dict(engine.accounts.balances)
    pool = balances.pop(POSITION_POOL, 0.0)
    venue = balances.pop(VENUE_ACCOUNT, 0.0)
    # Margin still parked in the pool (aborted runs) sits on the venue side
    # of the books so the identity closes.
    report.venue_cash = venue + pool
    report.trader_cash = dict(sorted(balances.items()))
