"""Contract-level index assembly: composes the pure constructors over an
aligned grid into one lifecycle-aware underlying series per variant,
including regime hand-offs (residual tracking, pass-through, rebalance
cascades, roll blending) and the discontinuities they force.

Every value at grid time t depends only on observations at or before t, so
replay lookups are causal by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .constructors import (
    SUPPORTS,
    DiscontinuityRecord,
    IndexSeries,
    conditional_values,
    entropy_value,
    liquidity_index,
    rebalance_weights,
    variance_index,
)
from .errors import SpecError, SpecValidationError
from .model import (
    AlignedGrid,
    Basket,
    Conditional,
    Entropy,
    FloorAction,
    FundingOnly,
    FundingTarget,
    LegSeries,
    Liquidity,
    NegRiskGroup,
    RebalanceRule,
    Rolling,
    Spread,
    Variance,
    VariantSpec,
    WeightRule,
    align_series,
    locf_values,
    validate_spec,
)
from .scheduling import (
    DEFAULT_RESOLUTION_ZONE_MS,
    RollPlan,
    roll_weight,
    schedule_roll,
)


@dataclass(frozen=True)
class ContractIndex:
    """The assembled contract underlying plus lifecycle metadata."""

    series: IndexSeries
    grid: AlignedGrid
    discontinuities: list[DiscontinuityRecord] = field(default_factory=list)
    floor_halts: list[tuple[int, int]] = field(default_factory=list)
    weights_timeline: list[tuple[int, tuple[float, ...]]] = field(default_factory=list)
    roll_plans: list[RollPlan] = field(default_factory=list)

    def value_at(self, time_ms: int) -> float:
        return self.series.value_at(time_ms)

    def leg_value_at(self, leg_id: str, time_ms: int) -> float:
        return self.grid.value_at(leg_id, time_ms)

    def weights_at(self, time_ms: int) -> tuple[float, ...]:
        current: tuple[float, ...] = ()
        for start, w in self.weights_timeline:
            if start <= time_ms:
                current = w
            else:
                break
        return current


def _taus(legs: Mapping[str, LegSeries], ids: Sequence[str]) -> list[int]:
    return [
        legs[i].resolution.tau_ms
        for i in ids
        if i in legs and legs[i].resolution is not None
    ]


def _gap_intervals(timestamps: np.ndarray, mask: np.ndarray) -> list[tuple[int, int]]:
    """Contiguous True stretches of a mask as [start, end] time intervals."""
    out: list[tuple[int, int]] = []
    start = None
    for t, flag in zip(timestamps, mask):
        if flag and start is None:
            start = int(t)
        elif not flag and start is not None:
            out.append((start, int(t)))
            start = None
    if start is not None:
        out.append((start, int(timestamps[-1])))
    return out


def resolve_basket_weights(
    spec: Basket, legs: Mapping[str, LegSeries]
) -> tuple[float, ...]:
    """Initial basket weights under the configured weight rule, normalized."""
    k = len(spec.legs)
    if spec.weight_rule is WeightRule.STATIC:
        return tuple(float(w) for w in spec.weights)
    if spec.weight_rule is WeightRule.EQUAL:
        return tuple(1.0 / k for _ in range(k))
    # volume-snapshot: proportional to cumulative traded volume up to the
    # snapshot time.
    snapped = []
    for leg_id in spec.legs:
        leg = legs[leg_id]
        total = sum(
            v for p, v in zip(leg.points, leg.volume) if p.time_ms <= spec.snapshot_ms
        )
        snapped.append(total)
    mass = sum(snapped)
    if mass <= 0:
        raise SpecValidationError(
            [SpecError("MalformedWeights", "snapshot_ms", "no traded volume at or before the snapshot")]
        )
    return tuple(v / mass for v in snapped)


def build_contract_index(
    spec: VariantSpec,
    legs: Mapping[str, LegSeries],
    groups: Sequence[NegRiskGroup] = (),
    grid_ms: int = 1000,
    validate: bool = True,
    zone_ms: int = DEFAULT_RESOLUTION_ZONE_MS,
) -> ContractIndex:
    """Construct the contract underlying for any variant over recorded legs.

    ``zone_ms`` is the resolution-zone width used to flag rolls that fail
    to complete before the outgoing constituent's zone.
    """
    if validate:
        validate_spec(spec, legs, groups, grid_ms)

    if isinstance(spec, Conditional):
        return _build_conditional(spec, legs, grid_ms)
    if isinstance(spec, Spread):
        return _build_spread(spec, legs, grid_ms)
    if isinstance(spec, Basket):
        return _build_basket(spec, legs, grid_ms)
    if isinstance(spec, Variance):
        return _build_variance(spec, legs, grid_ms)
    if isinstance(spec, Entropy):
        return _build_entropy(spec, legs, grid_ms)
    if isinstance(spec, Liquidity):
        return _build_liquidity(spec, legs, grid_ms)
    if isinstance(spec, Rolling):
        return _build_rolling(spec, legs, grid_ms, zone_ms)
    if isinstance(spec, FundingOnly):
        return _build_funding_only(spec, legs, grid_ms)
    raise TypeError(f"unsupported spec {type(spec)}")  # pragma: no cover


def _involved_grid(
    spec_legs: Sequence[str], legs: Mapping[str, LegSeries], grid_ms: int
) -> AlignedGrid:
    involved = [legs[i] for i in spec_legs]
    start = max(leg.first_time for leg in involved)
    taus = _taus(legs, spec_legs)
    return align_series(involved, grid_ms=grid_ms, start_ms=start, extra_times=taus)


def _build_conditional(
    spec: Conditional, legs: Mapping[str, LegSeries], grid_ms: int
) -> ContractIndex:
    ids = [spec.leg_a, spec.leg_b] + ([spec.joint_leg] if spec.joint_leg else [])
    grid = _involved_grid(ids, legs, grid_ms)
    p_a = grid.leg(spec.leg_a)
    if spec.joint_leg is not None:
        numerator = grid.leg(spec.joint_leg)
        denominator = grid.leg(spec.leg_b)
    else:
        numerator = p_a
        denominator = 1.0 - grid.leg(spec.leg_b)

    values, gaps = conditional_values(
        numerator, denominator, spec.denom_floor, spec.floor_action
    )

    discontinuities: list[DiscontinuityRecord] = []
    res_b = legs[spec.leg_b].resolution
    if res_b is not None:
        # The conditioning event for the pair: with a joint market it is the
        # denominator leg itself; in the mutually-exclusive form it is the
        # complement of leg_b, so the outcome inverts.
        held = res_b.outcome == 1 if spec.joint_leg is not None else res_b.outcome == 0
        tau_b = res_b.tau_ms
        after = grid.timestamps >= tau_b
        if held:
            # Pass-through: track the tracked leg directly from tau_b on.
            pre = float(values[after][0]) if after.any() else math.nan
            values = np.where(after, np.clip(p_a, 0.0, 1.0), values)
            gaps = np.where(after, False, gaps)
            if after.any():
                post = float(values[after][0])
                if pre != post and not (math.isnan(pre) or math.isnan(post)):
                    discontinuities.append(
                        DiscontinuityRecord(tau_b, pre, post, "conditioning-held-handoff")
                    )
        else:
            # Conditioning failed: freeze the last pre-resolution value; the
            # settlement engine applies the termination rule.
            if after.any():
                idx = int(np.argmax(after))
                frozen = values[idx - 1] if idx > 0 else 0.5
                values = np.where(after, frozen, values)
                gaps = np.where(after, False, gaps)

    series = IndexSeries(
        grid.timestamps, values, SUPPORTS["conditional"], "conditional", gaps
    )
    floor_halts = (
        _gap_intervals(grid.timestamps, gaps)
        if spec.floor_action is FloorAction.HALT
        else []
    )
    return ContractIndex(
        series=series,
        grid=grid,
        discontinuities=discontinuities,
        floor_halts=floor_halts,
    )


def _build_spread(
    spec: Spread, legs: Mapping[str, LegSeries], grid_ms: int
) -> ContractIndex:
    grid = _involved_grid([spec.leg_a, spec.leg_b], legs, grid_ms)
    a = grid.leg(spec.leg_a)
    b = grid.leg(spec.leg_b)
    values = np.clip(a - b, -1.0, 1.0)
    discontinuities = []
    for leg_id in (spec.leg_a, spec.leg_b):
        res = legs[leg_id].resolution
        if res is None:
            continue
        at = np.searchsorted(grid.timestamps, res.tau_ms, side="left")
        if 0 < at < len(values):
            pre, post = float(values[at - 1]), float(values[at])
            if pre != post:
                discontinuities.append(
                    DiscontinuityRecord(res.tau_ms, pre, post, f"resolution:{leg_id}")
                )
    series = IndexSeries(grid.timestamps, values, SUPPORTS["spread"], "spread")
    return ContractIndex(series=series, grid=grid, discontinuities=discontinuities)


def _build_basket(
    spec: Basket, legs: Mapping[str, LegSeries], grid_ms: int
) -> ContractIndex:
    grid = _involved_grid(spec.legs, legs, grid_ms)
    start_weights = resolve_basket_weights(spec, legs)
    leg_arrays = [grid.leg(i) for i in spec.legs]
    ts = grid.timestamps

    weights_timeline: list[tuple[int, tuple[float, ...]]] = [
        (int(ts[0]), start_weights)
    ]
    discontinuities: list[DiscontinuityRecord] = []

    if spec.rebalance_rule is RebalanceRule.NONE:
        values = np.zeros(len(ts), dtype=np.float64)
        for w, arr in zip(start_weights, leg_arrays):
            values = values + w * arr
        values = np.clip(values, 0.0, 1.0)
    else:
        # Drop-on-resolution: piecewise weights between resolutions; the last
        # surviving leg is never dropped (its resolution settles the basket).
        resolutions = sorted(
            (
                (legs[i].resolution.tau_ms, idx, i)
                for idx, i in enumerate(spec.legs)
                if legs[i].resolution is not None
            ),
        )
        values = np.zeros(len(ts), dtype=np.float64)
        weights = start_weights
        seg_start = 0
        for tau, leg_idx, leg_id in resolutions:
            cut = int(np.searchsorted(ts, tau, side="left"))
            remaining = sum(
                1 for w in (weights[j] for j in range(len(weights)) if j != leg_idx) if w > 0
            )
            for w, arr in zip(weights, leg_arrays):
                values[seg_start:cut] += w * arr[seg_start:cut]
            if remaining == 0 or cut >= len(ts):
                seg_start = cut
                continue
            leg_vals_at_tau = [
                float(arr[cut]) if cut < len(arr) else float(arr[-1])
                for arr in leg_arrays
            ]
            new_weights, record = rebalance_weights(
                weights,
                leg_idx,
                RebalanceRule.DROP_ON_RESOLUTION,
                leg_values=leg_vals_at_tau,
                time_ms=tau,
            )
            if record is not None and record.pre_value != record.post_value:
                discontinuities.append(record)
            weights = new_weights
            weights_timeline.append((tau, weights))
            seg_start = cut
        for w, arr in zip(weights, leg_arrays):
            values[seg_start:] += w * arr[seg_start:]
        values = np.clip(values, 0.0, 1.0)

    series = IndexSeries(ts, values, SUPPORTS["basket"], "basket")
    return ContractIndex(
        series=series,
        grid=grid,
        discontinuities=discontinuities,
        weights_timeline=weights_timeline,
    )


def _build_variance(
    spec: Variance, legs: Mapping[str, LegSeries], grid_ms: int
) -> ContractIndex:
    leg = legs[spec.leg]
    start = leg.first_time
    end = leg.last_time
    sample_times = np.arange(start, end + 1, spec.tick_ms, dtype=np.int64)
    samples = locf_values(leg, sample_times)
    series = variance_index(
        samples,
        spec.estimator,
        spec.window_ms,
        spec.tick_ms,
        spec.normalization,
        timestamps=sample_times,
    )
    grid = align_series([leg], grid_ms=grid_ms, extra_times=_taus(legs, [spec.leg]))
    return ContractIndex(series=series, grid=grid)


def _build_entropy(
    spec: Entropy, legs: Mapping[str, LegSeries], grid_ms: int
) -> ContractIndex:
    grid = _involved_grid([spec.leg], legs, grid_ms)
    p = grid.leg(spec.leg)
    values = np.array([entropy_value(float(x)) for x in p])
    res = legs[spec.leg].resolution
    discontinuities = []
    if res is not None:
        at = int(np.searchsorted(grid.timestamps, res.tau_ms, side="left"))
        if 0 < at < len(values) and values[at - 1] != values[at]:
            discontinuities.append(
                DiscontinuityRecord(
                    res.tau_ms, float(values[at - 1]), float(values[at]), "entropy-collapse"
                )
            )
    series = IndexSeries(grid.timestamps, values, SUPPORTS["entropy"], "entropy")
    return ContractIndex(series=series, grid=grid, discontinuities=discontinuities)


def _build_liquidity(
    spec: Liquidity, legs: Mapping[str, LegSeries], grid_ms: int
) -> ContractIndex:
    grid = _involved_grid(spec.member_legs, legs, grid_ms)
    members = [legs[i] for i in spec.member_legs]
    series = liquidity_index(members, spec.measure, grid.timestamps, spec.aggregate)
    return ContractIndex(series=series, grid=grid)


def _build_rolling(
    spec: Rolling, legs: Mapping[str, LegSeries], grid_ms: int, zone_ms: int
) -> ContractIndex:
    # Successors may list after the first constituent starts trading; the
    # grid begins with the first constituent and later legs are NaN until
    # their own first observation (the blend guards against that).
    involved = [legs[c] for c in spec.constituents]
    grid = align_series(
        involved,
        grid_ms=grid_ms,
        start_ms=involved[0].first_time,
        extra_times=_taus(legs, spec.constituents),
    )
    ts = grid.timestamps
    plans = schedule_roll(spec, legs, zone_ms=zone_ms)
    arrays = [grid.leg(c) for c in spec.constituents]

    cum_volumes: dict[int, np.ndarray] = {}
    for plan in plans:
        if plan.mechanism.kind != "volume-weighted":
            continue
        succ = legs[spec.constituents[plan.to_constituent]]
        vol_times = np.array([p.time_ms for p in succ.points], dtype=np.int64)
        vols = np.array(succ.volume, dtype=np.float64)
        eligible = vol_times >= plan.mechanism.start_ms
        csum = np.cumsum(np.where(eligible, vols, 0.0))
        idx = np.searchsorted(vol_times, ts, side="right") - 1
        cum_volumes[plan.from_constituent] = np.where(idx >= 0, csum[np.clip(idx, 0, None)], 0.0)

    values = np.empty(len(ts), dtype=np.float64)
    discontinuities: list[DiscontinuityRecord] = []
    active = 0
    for i, t in enumerate(ts):
        t = int(t)
        while active < len(plans) and plans[active].completion_ms is not None and t > plans[active].completion_ms:
            active += 1
        if active < len(plans):
            plan = plans[active]
            cv = (
                float(cum_volumes[plan.from_constituent][i])
                if plan.from_constituent in cum_volumes
                else None
            )
            lam = roll_weight(plan.mechanism, t, cv)
        else:
            lam = 0.0
        base = arrays[active][i]
        succ = arrays[active + 1][i] if active + 1 < len(arrays) else base
        if lam <= 0.0 or math.isnan(succ):
            values[i] = base  # roll waits for successor data
        elif lam >= 1.0:
            values[i] = succ
        else:
            values[i] = (1.0 - lam) * base + lam * succ

    for plan in plans:
        if plan.mechanism.kind == "cliff" and plan.completion_ms is not None:
            at = int(np.searchsorted(ts, plan.completion_ms, side="left"))
            if 0 < at < len(values) and values[at - 1] != values[at]:
                discontinuities.append(
                    DiscontinuityRecord(
                        plan.completion_ms,
                        float(values[at - 1]),
                        float(values[at]),
                        f"cliff-roll:{plan.from_constituent}->{plan.to_constituent}",
                    )
                )

    series = IndexSeries(ts, np.clip(values, 0.0, 1.0), SUPPORTS["rolling"], "rolling")
    return ContractIndex(
        series=series, grid=grid, discontinuities=discontinuities, roll_plans=plans
    )


def _build_funding_only(
    spec: FundingOnly, legs: Mapping[str, LegSeries], grid_ms: int
) -> ContractIndex:
    ids = [spec.leg_a] + ([spec.leg_b] if spec.leg_b else [])
    grid = _involved_grid(ids, legs, grid_ms)
    a = grid.leg(spec.leg_a)
    if spec.target is FundingTarget.DIVERGENCE:
        values = np.abs(a - grid.leg(spec.leg_b))
    else:
        # Basis target: the underlying market's mark minus its index. With no
        # recorded mark for the constituent, the replay's synthetic mark
        # overlay supplies the basis; the raw target here is zero.
        values = np.zeros_like(a)
    series = IndexSeries(
        grid.timestamps, values, SUPPORTS["funding-target"], "funding-target"
    )
    return ContractIndex(series=series, grid=grid)
