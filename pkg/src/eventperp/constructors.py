"""Pure transforms from aligned per-leg values to contract-level underlyings.

Every operation here is a pure function of immutable inputs; the replay
harness composes them, and the test suite cross-checks the windowed
estimators against from-scratch recomputation.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import (
    AllLegsResolvedError,
    MissingMicrostructureSeriesError,
    SameLegError,
    WeightMismatchError,
    WindowTooShortError,
)
from .model import (
    FloorAction,
    LegSeries,
    LiquidityMeasure,
    RebalanceRule,
    VarianceEstimator,
    VarianceNormalization,
    locf_values,
)

#: Division floor for the composite volume/|price change| liquidity measure.
AMIHUD_PRICE_FLOOR = 1e-6

#: Natural supports by variant tag; open bounds are declared, not asserted.
SUPPORTS: dict[str, tuple[float, float]] = {
    "conditional": (0.0, 1.0),
    "spread": (-1.0, 1.0),
    "basket": (0.0, 1.0),
    "variance-level": (0.0, 0.25),
    "variance-increments": (0.0, math.inf),
    "entropy": (0.0, 1.0),
    "liquidity": (0.0, math.inf),
    "rolling": (0.0, 1.0),
    "funding-target": (-math.inf, math.inf),
}


@dataclass(frozen=True)
class IndexSeries:
    """A contract-level underlying series with its declared support."""

    timestamps: np.ndarray
    values: np.ndarray
    support: tuple[float, float]
    provenance: str
    gap_mask: Optional[np.ndarray] = None  # True where a floor halt is flagged

    def __post_init__(self):
        if len(self.timestamps) != len(self.values):
            raise ValueError("timestamps and values must align")

    def value_at(self, time_ms: int) -> float:
        idx = int(np.searchsorted(self.timestamps, time_ms, side="right")) - 1
        if idx < 0:
            return math.nan
        return float(self.values[idx])

    def last_value_before(self, time_ms: int) -> float:
        return self.value_at(time_ms)


@dataclass(frozen=True)
class DiscontinuityRecord:
    """An underlying jump forced by a rule (rebalance, cliff roll, collapse)."""

    time_ms: int
    pre_value: float
    post_value: float
    cause: str


# ---------------------------------------------------------------------------
# Conditional
# ---------------------------------------------------------------------------


def conditional_values(
    joint: np.ndarray,
    denom: np.ndarray,
    floor: float,
    floor_action: FloorAction,
    last_valid: float | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Ratio joint/denom with the small-denominator regime absorbed.

    Where denom >= floor the ratio is emitted, clamped to [0, 1]. Where
    denom < floor: clip-to-last repeats the most recent valid value (0.5 if
    none exists yet), halt repeats it too but flags the point so the engine
    treats the stretch as a trading halt. Returns (values, gap_mask).
    """
    if floor <= 0:
        raise ValueError("denominator floor must be > 0")
    joint = np.asarray(joint, dtype=np.float64)
    denom = np.asarray(denom, dtype=np.float64)
    valid = denom >= floor
    out = np.empty_like(joint)
    gap = np.zeros(joint.shape, dtype=bool)
    last = 0.5 if last_valid is None else float(min(max(last_valid, 0.0), 1.0))
    for i in range(joint.size):
        if valid[i]:
            last = min(max(joint[i] / denom[i], 0.0), 1.0)
            out[i] = last
        else:
            out[i] = last
            gap[i] = True
    if floor_action is FloorAction.CLIP_TO_LAST:
        gap = np.zeros(joint.shape, dtype=bool)
    return out, gap


def conditional_index(
    joint: np.ndarray,
    denom: np.ndarray,
    floor: float,
    floor_action: FloorAction = FloorAction.CLIP_TO_LAST,
    last_valid: float | None = None,
    timestamps: np.ndarray | None = None,
) -> IndexSeries:
    """Conditional-probability underlying joint/denominator on [0, 1]."""
    values, gap = conditional_values(joint, denom, floor, floor_action, last_valid)
    ts = np.arange(len(values), dtype=np.int64) if timestamps is None else timestamps
    return IndexSeries(ts, values, SUPPORTS["conditional"], "conditional", gap)


def negrisk_conditional(
    p_i: np.ndarray,
    p_j: np.ndarray,
    floor: float,
    floor_action: FloorAction = FloorAction.CLIP_TO_LAST,
    leg_i: str | None = None,
    leg_j: str | None = None,
    timestamps: np.ndarray | None = None,
) -> IndexSeries:
    """Conditional within a mutually exclusive group: p_i / (1 - p_j).

    Observable directly from the two member legs; the same floor machinery
    applies to the complement denominator.
    """
    if leg_i is not None and leg_i == leg_j:
        raise SameLegError(f"conditional pair references leg {leg_i} twice")
    denom = 1.0 - np.asarray(p_j, dtype=np.float64)
    return conditional_index(p_i, denom, floor, floor_action, None, timestamps)


# ---------------------------------------------------------------------------
# Spread and basket
# ---------------------------------------------------------------------------


def spread_index(
    a: np.ndarray,
    b: np.ndarray,
    frozen: Mapping[str, int] | None = None,
    timestamps: np.ndarray | None = None,
) -> IndexSeries:
    """Spread underlying a - b on [-1, +1].

    ``frozen`` maps the side names "a"/"b" to resolved outcomes; a frozen
    side contributes its outcome, producing the residual form after the
    first resolution and a member of {-1, 0, +1} once both are frozen.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    frozen = frozen or {}
    if "a" in frozen:
        a = np.full_like(a, float(frozen["a"]))
    if "b" in frozen:
        b = np.full_like(b, float(frozen["b"]))
    values = np.clip(a - b, -1.0, 1.0)
    ts = np.arange(len(values), dtype=np.int64) if timestamps is None else timestamps
    return IndexSeries(ts, values, SUPPORTS["spread"], "spread")


def weighted_sum(weights: Sequence[float], values: Sequence[float]) -> float:
    """Left-to-right weighted sum; the settlement engine and the terminal-set
    enumeration both use this exact summation order."""
    total = 0.0
    for w, v in zip(weights, values):
        total += w * v
    return total


def basket_index(
    legs: Sequence[np.ndarray],
    weights: Sequence[float],
    frozen: Mapping[int, int] | None = None,
    timestamps: np.ndarray | None = None,
) -> IndexSeries:
    """Weighted-sum underlying on [0, 1] for a normalized weight vector.

    ``frozen`` maps leg positions to outcomes; frozen legs contribute
    weight * outcome (the no-rebalance rule). Drop-on-resolution is applied
    upstream by renormalizing the weight vector.
    """
    if len(weights) != len(legs):
        raise WeightMismatchError(f"{len(weights)} weights for {len(legs)} legs")
    frozen = frozen or {}
    arrays = []
    for i, leg in enumerate(legs):
        arr = np.asarray(leg, dtype=np.float64)
        if i in frozen:
            arr = np.full_like(arr, float(frozen[i]))
        arrays.append(arr)
    values = np.zeros_like(arrays[0])
    for w, arr in zip(weights, arrays):
        values = values + w * arr
    values = np.clip(values, 0.0, 1.0)
    ts = np.arange(len(values), dtype=np.int64) if timestamps is None else timestamps
    return IndexSeries(ts, values, SUPPORTS["basket"], "basket")


def rebalance_weights(
    weights: Sequence[float],
    resolved_leg: int,
    rule: RebalanceRule,
    leg_values: Sequence[float] | None = None,
    time_ms: int | None = None,
) -> tuple[tuple[float, ...], Optional[DiscontinuityRecord]]:
    """Apply the basket rebalance rule when one leg resolves.

    The none rule returns weights unchanged. Drop-on-resolution zeroes the
    resolved leg and renormalizes the survivors to sum one; when leg values
    are supplied the induced underlying jump is recorded, since removing a
    leg moves the index discontinuously.
    """
    w = list(float(x) for x in weights)
    if not 0 <= resolved_leg < len(w):
        raise IndexError(f"resolved leg {resolved_leg} out of range")
    if rule is RebalanceRule.NONE:
        return tuple(w), None
    survivors = sum(x for i, x in enumerate(w) if i != resolved_leg)
    if survivors <= 0:
        raise AllLegsResolvedError("no surviving weight mass to renormalize")
    new_w = tuple(
        0.0 if i == resolved_leg else x / survivors for i, x in enumerate(w)
    )
    record = None
    if leg_values is not None:
        pre = weighted_sum(w, leg_values)
        post = weighted_sum(new_w, leg_values)
        record = DiscontinuityRecord(
            time_ms=time_ms if time_ms is not None else 0,
            pre_value=pre,
            post_value=post,
            cause="drop-on-resolution",
        )
    return new_w, record


# ---------------------------------------------------------------------------
# Variance (streaming) and entropy
# ---------------------------------------------------------------------------


class _NeumaierSum:
    """Compensated running sum; keeps rolling add/subtract drift near one ulp
    so the streaming estimator stays within 1e-12 of a from-scratch pass."""

    __slots__ = ("_s", "_c")

    def __init__(self):
        self._s = 0.0
        self._c = 0.0

    def add(self, x: float) -> None:
        t = self._s + x
        if abs(self._s) >= abs(x):
            self._c += (self._s - t) + x
        else:
            self._c += (x - t) + self._s
        self._s = t

    @property
    def value(self) -> float:
        return self._s + self._c


class StreamingVariance:
    """Rolling-window dispersion of a probability path, updated per sample.

    Two conventions:

    * ``level``: population variance of the values sampled in the window;
      bounded by 0.25 for any [0, 1]-valued input.
    * ``increments``: sum of squared per-tick changes over the window,
      divided by the increment count under per-window normalization; no
      generic upper bound.
    """

    def __init__(
        self,
        estimator: VarianceEstimator,
        window_samples: int,
        normalization: VarianceNormalization = VarianceNormalization.PER_WINDOW,
    ):
        if window_samples < 1:
            raise WindowTooShortError("window must cover at least one tick")
        self.estimator = estimator
        self.normalization = normalization
        self.window_samples = window_samples
        self._values: deque[float] = deque()
        self._sum = _NeumaierSum()
        self._sumsq = _NeumaierSum()
        self._prev: float | None = None

    def push(self, x: float) -> None:
        x = float(x)
        if self.estimator is VarianceEstimator.LEVEL:
            self._values.append(x)
            self._sum.add(x)
            self._sumsq.add(x * x)
            # level window holds window_samples + 1 values: both endpoints.
            while len(self._values) > self.window_samples + 1:
                old = self._values.popleft()
                self._sum.add(-old)
                self._sumsq.add(-(old * old))
        else:
            if self._prev is not None:
                inc = x - self._prev
                sq = inc * inc
                self._values.append(sq)
                self._sum.add(sq)
                while len(self._values) > self.window_samples:
                    old = self._values.popleft()
                    self._sum.add(-old)
            self._prev = x

    @property
    def ready(self) -> bool:
        if self.estimator is VarianceEstimator.LEVEL:
            return len(self._values) == self.window_samples + 1
        return len(self._values) == self.window_samples

    def value(self) -> float:
        n = len(self._values)
        if n == 0:
            return 0.0
        if self.estimator is VarianceEstimator.LEVEL:
            mean = self._sum.value / n
            var = self._sumsq.value / n - mean * mean
            return float(min(max(var, 0.0), 0.25))
        total = self._sum.value
        if self.normalization is VarianceNormalization.PER_WINDOW:
            total /= n
        return float(max(total, 0.0))


def variance_index(
    leg_values: np.ndarray,
    estimator: VarianceEstimator,
    window_ms: int,
    tick_ms: int,
    normalization: VarianceNormalization = VarianceNormalization.PER_WINDOW,
    timestamps: np.ndarray | None = None,
) -> IndexSeries:
    """Rolling-window variance underlying of one leg.

    ``leg_values`` must already be sampled at ``tick_ms`` spacing; values are
    emitted only once one full window of observations exists, at tick
    timestamps.
    """
    if tick_ms <= 0 or window_ms <= 0 or tick_ms >= window_ms:
        raise ValueError("need 0 < tick_ms < window_ms")
    window_samples = window_ms // tick_ms
    leg_values = np.asarray(leg_values, dtype=np.float64)
    if leg_values.size <= window_samples:
        raise WindowTooShortError(
            f"{leg_values.size} samples cannot fill a {window_samples}-tick window"
        )
    stream = StreamingVariance(estimator, window_samples, normalization)
    out_vals = []
    out_ts = []
    ts = (
        np.arange(leg_values.size, dtype=np.int64) * tick_ms
        if timestamps is None
        else timestamps
    )
    for i, x in enumerate(leg_values):
        stream.push(float(x))
        if stream.ready:
            out_vals.append(stream.value())
            out_ts.append(ts[i])
    tag = (
        "variance-level"
        if estimator is VarianceEstimator.LEVEL
        else "variance-increments"
    )
    return IndexSeries(
        np.array(out_ts, dtype=np.int64),
        np.array(out_vals, dtype=np.float64),
        SUPPORTS[tag],
        tag,
    )


def entropy_value(p: float) -> float:
    """Binary entropy with the 0 * log 0 = 0 convention; exactly 0 at the
    boundaries so the deterministic collapse at resolution is exact."""
    if p <= 0.0 or p >= 1.0:
        return 0.0
    h = -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)
    return min(max(h, 0.0), 1.0)


def entropy_index(
    leg_values: np.ndarray, timestamps: np.ndarray | None = None
) -> IndexSeries:
    """Binary-entropy underlying of one leg on [0, 1]."""
    leg_values = np.asarray(leg_values, dtype=np.float64)
    values = np.array([entropy_value(float(p)) for p in leg_values])
    ts = np.arange(len(values), dtype=np.int64) if timestamps is None else timestamps
    return IndexSeries(ts, values, SUPPORTS["entropy"], "entropy")


# ---------------------------------------------------------------------------
# Liquidity and funding targets
# ---------------------------------------------------------------------------


def liquidity_index(
    legs: Sequence[LegSeries],
    measure: LiquidityMeasure,
    timestamps: np.ndarray,
    aggregate: str = "mean",
) -> IndexSeries:
    """Microstructure-quality underlying over member legs.

    median-half-spread takes the cross-member median of half-spreads per
    grid point; depth aggregates the 200 bps depth (mean by default);
    the composite volume-impact measure divides per-step volume by the
    absolute per-step mid change, floored to avoid division by zero,
    then aggregates cross-member. Volume-impact values start one grid
    step after the series start.
    """
    timestamps = np.asarray(timestamps, dtype=np.int64)
    field_name = {
        LiquidityMeasure.MEDIAN_HALF_SPREAD: "half_spread",
        LiquidityMeasure.DEPTH: "depth_200bps",
        LiquidityMeasure.AMIHUD: "volume",
    }[measure]
    for leg in legs:
        if getattr(leg, field_name) is None:
            raise MissingMicrostructureSeriesError(
                f"leg {leg.leg_id} lacks the {field_name} series required by {measure.value}"
            )

    def micro_locf(leg: LegSeries, name: str) -> np.ndarray:
        times = np.array([p.time_ms for p in leg.points], dtype=np.int64)
        vals = np.array(getattr(leg, name), dtype=np.float64)
        idx = np.searchsorted(times, timestamps, side="right") - 1
        return np.where(idx >= 0, vals[np.clip(idx, 0, None)], np.nan)

    if measure is LiquidityMeasure.MEDIAN_HALF_SPREAD:
        stacked = np.vstack([micro_locf(leg, "half_spread") for leg in legs])
        values = np.median(stacked, axis=0)
        return IndexSeries(timestamps, values, SUPPORTS["liquidity"], "liquidity")

    if measure is LiquidityMeasure.DEPTH:
        stacked = np.vstack([micro_locf(leg, "depth_200bps") for leg in legs])
        values = stacked.mean(axis=0) if aggregate == "mean" else np.median(stacked, axis=0)
        return IndexSeries(timestamps, values, SUPPORTS["liquidity"], "liquidity")

    # Volume-impact composite: per-leg volume / |mid change| per grid step.
    per_leg = []
    for leg in legs:
        mids = locf_values(leg, timestamps)
        vols = micro_locf(leg, "volume")
        dp = np.abs(np.diff(mids))
        dp = np.maximum(dp, AMIHUD_PRICE_FLOOR)
        per_leg.append(vols[1:] / dp)
    stacked = np.vstack(per_leg)
    values = stacked.mean(axis=0) if aggregate == "mean" else np.median(stacked, axis=0)
    return IndexSeries(timestamps[1:], values, SUPPORTS["liquidity"], "liquidity")


def funding_target_values(
    target: str,
    primary: np.ndarray,
    secondary: np.ndarray | None = None,
) -> np.ndarray:
    """Funding-only target series: ``basis`` emits mark - index (signed, the
    caller passes the basis directly as ``primary``), ``divergence`` emits
    |primary - secondary| (non-negative)."""
    primary = np.asarray(primary, dtype=np.float64)
    if target == "basis":
        return primary
    if target == "divergence":
        if secondary is None:
            raise ValueError("divergence target needs two series")
        return np.abs(primary - np.asarray(secondary, dtype=np.float64))
    raise ValueError(f"unsupported funding target {target!r}")


def funding_target(
    target: str,
    mark: np.ndarray | None = None,
    index: np.ndarray | None = None,
    series_a: np.ndarray | None = None,
    series_b: np.ndarray | None = None,
    timestamps: np.ndarray | None = None,
) -> IndexSeries:
    """Target quantity for a funding-only contract.

    basis: mark - index for one underlying market (signed).
    divergence: |series_a - series_b| (non-negative).
    The disagreement target is rejected at spec validation; reaching it here
    is a programming error.
    """
    if target == "basis":
        if mark is None or index is None:
            raise ValueError("basis target needs mark and index series")
        values = np.asarray(mark, dtype=np.float64) - np.asarray(index, dtype=np.float64)
    elif target == "divergence":
        values = funding_target_values("divergence", series_a, series_b)
    else:
        raise ValueError(f"unsupported funding target {target!r}")
    ts = np.arange(len(values), dtype=np.int64) if timestamps is None else timestamps
    return IndexSeries(ts, values, SUPPORTS["funding-target"], "funding-target")
