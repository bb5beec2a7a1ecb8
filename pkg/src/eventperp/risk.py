"""Margin, leverage caps, funding with boundary corrections, and
liquidation / bad-debt accounting.

The maintenance schedule sizes a jump component against the worst-case
terminal move of the contract underlying; the leverage schedule compresses
linearly as the closest resolution approaches; funding divides the basis by
a variant-appropriate correction and clips per interval. One unit of
notional pays (mark - entry) in collateral units.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from .errors import IncompatibleCorrectionError
from .model import Position, Side

#: Denominator guard for per-leg funding corrections; pre-resolution leg
#: values live in (0, 1) but recorded ticks can print the bounds exactly.
CORRECTION_EPS = 1e-9


class MarginAggregation(str, enum.Enum):
    MAX = "max"
    SUM = "sum"


@dataclass(frozen=True)
class MarginSchedule:
    """Maintenance margin as a fraction of notional: a flat base rate plus a
    jump component that activates as resolution approaches."""

    base_rate: float = 0.05
    jump_coeff: float = 1.0
    proximity_horizon_ms: int = 86_400_000
    aggregation: MarginAggregation = MarginAggregation.SUM

    def __post_init__(self):
        if not 0.0 <= self.base_rate <= 1.0:
            raise ValueError("base_rate must be in [0, 1]")
        if not 0.0 <= self.jump_coeff <= 1.0:
            raise ValueError("jump_coeff must be in [0, 1]")
        if self.proximity_horizon_ms <= 0:
            raise ValueError("proximity_horizon_ms must be positive")


class FundingCorrection(str, enum.Enum):
    PER_LEG_MIN = "per-leg-min"
    VARIANCE_FLOOR = "variance-floor"
    NONE = "none"


@dataclass(frozen=True)
class FundingParams:
    """Funding sensitivity, boundary correction, and per-interval clipping."""

    sensitivity: float = 1.0
    correction: FundingCorrection = FundingCorrection.NONE
    variance_floor_eps: float = 1e-4
    clip: tuple[float, float] = (-0.05, 0.05)
    interval_ms: int = 3_600_000

    def __post_init__(self):
        lo, hi = self.clip
        if lo > 0 or hi < 0:
            raise ValueError("clip must satisfy lo <= 0 <= hi")
        if self.correction is FundingCorrection.VARIANCE_FLOOR and self.variance_floor_eps <= 0:
            raise ValueError("variance-floor correction needs eps > 0")
        if self.interval_ms <= 0:
            raise ValueError("interval_ms must be positive")


@dataclass(frozen=True)
class LeverageSchedule:
    """Leverage cap far from resolution, the cap at resolution-zone entry,
    and the linear compression window leading into the zone."""

    base: float = 10.0
    floor: float = 2.0
    ramp_ms: int = 7 * 86_400_000

    def __post_init__(self):
        if self.floor > self.base:
            raise ValueError("floor leverage cannot exceed base leverage")
        if self.floor < 1.0:
            raise ValueError("leverage caps must be >= 1")
        if self.ramp_ms <= 0:
            raise ValueError("ramp_ms must be positive")


@dataclass(frozen=True)
class RiskConfig:
    """Bundle of the three risk schedules plus liquidation fill slippage."""

    margin: MarginSchedule = MarginSchedule()
    funding: FundingParams = FundingParams()
    leverage: LeverageSchedule = LeverageSchedule()
    liquidation_slippage: float = 0.0
    spread_simultaneous: Optional[bool] = None  # None = auto (tau gap <= one grid step)


# ---------------------------------------------------------------------------
# Jump magnitude
# ---------------------------------------------------------------------------


def jump_magnitude_single(index_value: float, side: Side) -> float:
    """Worst-case collapse move of a [0, 1] probability underlying: longs
    face a drop to 0, shorts a jump to 1."""
    if math.isnan(index_value):
        return 0.0
    v = min(max(index_value, 0.0), 1.0)
    return v if side is Side.LONG else 1.0 - v


def jump_magnitude_spread(
    leg_a: float,
    leg_b: float,
    side: Side,
    frozen_a: Optional[int] = None,
    frozen_b: Optional[int] = None,
    simultaneous: bool = False,
) -> float:
    """Worst-case terminal move of a spread underlying a - b.

    A resolved side contributes no further jump. With both sides live the
    per-leg adverse distances are a drop of leg a to 0 and a rise of leg b
    to 1 for longs (mirrored for shorts); the simultaneous-resolution regime
    doubles the larger distance, capped at the full support width 2.
    """
    dists = []
    if frozen_a is None:
        dists.append(jump_magnitude_single(leg_a, side))
    if frozen_b is None:
        # Short exposure to leg b: adverse move mirrors the side.
        opposite = Side.SHORT if side is Side.LONG else Side.LONG
        dists.append(jump_magnitude_single(leg_b, opposite))
    if not dists:
        return 0.0
    if len(dists) == 1:
        return dists[0]
    if simultaneous:
        return min(2.0 * max(dists), 2.0)
    return max(dists)


def jump_magnitude_basket(
    leg_values: Sequence[float],
    weights: Sequence[float],
    side: Side,
    frozen: Mapping[int, int] | None = None,
    aggregation: MarginAggregation = MarginAggregation.SUM,
) -> float:
    """Worst-case terminal move of a basket: weighted per-leg adverse
    distances over unresolved legs, aggregated by max (staggered
    resolutions) or sum (correlated / simultaneous resolutions)."""
    frozen = frozen or {}
    dists = [
        w * jump_magnitude_single(v, side)
        for i, (v, w) in enumerate(zip(leg_values, weights))
        if i not in frozen
    ]
    if not dists:
        return 0.0
    if aggregation is MarginAggregation.SUM:
        return min(sum(dists), 1.0)
    return max(dists)


# ---------------------------------------------------------------------------
# Margin and leverage schedules
# ---------------------------------------------------------------------------


def proximity_weight(time_to_closest_tau_ms: float, horizon_ms: int) -> float:
    """Jump-component activation: 1 inside the proximity horizon, decaying
    hyperbolically outside, 0 with no scheduled resolution."""
    if math.isinf(time_to_closest_tau_ms):
        return 0.0
    if time_to_closest_tau_ms <= horizon_ms:
        return 1.0
    return horizon_ms / time_to_closest_tau_ms


def maintenance_margin(
    notional: float,
    jump_magnitude: float,
    schedule: MarginSchedule,
    time_to_closest_tau_ms: float,
) -> float:
    """Required maintenance collateral, capped at notional (the largest loss
    one unit of notional can take on a unit-support underlying)."""
    phi = proximity_weight(time_to_closest_tau_ms, schedule.proximity_horizon_ms)
    fraction = schedule.base_rate + schedule.jump_coeff * jump_magnitude * phi
    return min(notional * fraction, notional)


def max_leverage(
    time_to_closest_tau_ms: float,
    schedule: LeverageSchedule,
    zone_ms: int = 0,
) -> float:
    """Leverage cap: base outside the compression ramp, linear down to the
    floor at resolution-zone entry, floor inside the zone. Contracts with no
    scheduled resolution pass infinity and always get the base cap."""
    if math.isinf(time_to_closest_tau_ms):
        return schedule.base
    tt = max(time_to_closest_tau_ms, 0.0)
    if tt >= zone_ms + schedule.ramp_ms:
        return schedule.base
    if tt <= zone_ms:
        return schedule.floor
    frac = (tt - zone_ms) / schedule.ramp_ms
    return schedule.floor + (schedule.base - schedule.floor) * frac


# ---------------------------------------------------------------------------
# Funding
# ---------------------------------------------------------------------------


def _per_leg_min(value: float) -> float:
    v = min(max(value, 0.0), 1.0)
    return max(min(v, 1.0 - v), CORRECTION_EPS)


def funding_rate(
    mark: float,
    index: float,
    params: FundingParams,
    variant_kind: str,
    live_leg_values: Sequence[float] = (),
) -> float:
    """Clipped funding rate for one interval.

    raw = sensitivity * (mark - index) / C, where C is min(v, 1 - v) of the
    contract value for [0, 1]-supported underlyings, the smallest live-leg
    min(v, 1 - v) for a spread (the largest per-leg correction; the single
    unresolved leg once one side has resolved), index + eps for variance,
    and 1 with no correction. Callers pass only unresolved legs in
    ``live_leg_values``: resolved legs drop out of the correction.
    """
    basis = mark - index
    if basis == 0.0:
        return 0.0
    raw = params.sensitivity * basis

    if params.correction is FundingCorrection.NONE:
        pass
    elif params.correction is FundingCorrection.PER_LEG_MIN:
        if variant_kind in ("variance", "liquidity", "funding-only"):
            raise IncompatibleCorrectionError(
                f"per-leg-min correction undefined for {variant_kind} support"
            )
        if variant_kind == "spread":
            if live_leg_values:
                raw = raw / min(_per_leg_min(v) for v in live_leg_values)
        else:
            raw = raw / _per_leg_min(index)
    elif params.correction is FundingCorrection.VARIANCE_FLOOR:
        if variant_kind != "variance":
            raise IncompatibleCorrectionError(
                "variance-floor correction only applies to the variance variant"
            )
        raw = raw / (max(index, 0.0) + params.variance_floor_eps)

    lo, hi = params.clip
    return float(min(max(raw, lo), hi))


@dataclass(frozen=True)
class FundingTransfer:
    """One signed cash movement: positive credits the position's trader."""

    position_id: int
    trader_id: str
    amount: float


def accrue_funding(
    positions: Sequence[Position], rate: float
) -> list[FundingTransfer]:
    """Per-position funding transfers for one interval.

    Paying positions each owe rate * notional; the paid total is distributed
    to the receiving side pro rata by notional, with the residual assigned
    to the last receiver so the interval sums to zero exactly. With an empty
    receiving side nothing moves.
    """
    if rate == 0.0 or not positions:
        return []
    payers_side = Side.LONG if rate > 0 else Side.SHORT
    payers = [p for p in positions if p.side is payers_side]
    receivers = [p for p in positions if p.side is not payers_side]
    if not payers or not receivers:
        return []
    transfers = []
    paid_total = 0.0
    for p in payers:
        amount = abs(rate) * p.notional
        transfers.append(FundingTransfer(p.position_id, p.trader_id, -amount))
        paid_total += amount
    recv_notional = sum(r.notional for r in receivers)
    remaining = paid_total
    for i, r in enumerate(receivers):
        if i < len(receivers) - 1:
            amount = paid_total * (r.notional / recv_notional)
            remaining -= amount
        else:
            amount = remaining  # exact zero-sum residual to the last receiver
        transfers.append(FundingTransfer(r.position_id, r.trader_id, amount))
    return transfers


# ---------------------------------------------------------------------------
# Liquidation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LiquidationResult:
    """Outcome of a margin check: healthy, or a forced close with the fill
    price, the collateral returned, and any uncovered shortfall."""

    liquidate: bool
    fill_price: float = math.nan
    equity_after: float = 0.0
    bad_debt: float = 0.0


def check_liquidation(
    position: Position,
    mark: float,
    index: float,
    maintenance: float,
    slippage: float = 0.0,
    extra_collateral: float = 0.0,
) -> LiquidationResult:
    """Liquidate when posted margin plus unrealized PnL at mark falls below
    maintenance; the forced close fills at index shifted against the
    position by the configured slippage. Bad debt is the loss the returned
    collateral cannot cover. ``extra_collateral`` counts funding accruals
    buffered outside the posted margin."""
    collateral = position.margin_posted + extra_collateral
    equity = collateral + position.unrealized_pnl(mark)
    if equity >= maintenance:
        return LiquidationResult(liquidate=False, equity_after=equity)
    fill = index - position.side.sign * slippage
    equity_after = collateral + position.unrealized_pnl(fill)
    bad_debt = max(0.0, -equity_after)
    return LiquidationResult(
        liquidate=True,
        fill_price=fill,
        equity_after=equity_after,
        bad_debt=bad_debt,
    )
