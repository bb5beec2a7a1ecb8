"""Constructor correctness: frozen expected values, support containment,
and streaming-vs-brute-force oracle equivalence for the windowed estimators.

Brute-force oracles here recompute every window from scratch and never call
the streaming path they check.
"""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eventperp.constructors import (
    AMIHUD_PRICE_FLOOR,
    DiscontinuityRecord,
    StreamingVariance,
    basket_index,
    conditional_index,
    entropy_index,
    entropy_value,
    funding_target,
    liquidity_index,
    negrisk_conditional,
    rebalance_weights,
    spread_index,
    variance_index,
    weighted_sum,
)
from eventperp.errors import (
    AllLegsResolvedError,
    MissingMicrostructureSeriesError,
    SameLegError,
    WeightMismatchError,
    WindowTooShortError,
)
from eventperp.model import (
    FloorAction,
    LiquidityMeasure,
    RebalanceRule,
    VarianceEstimator,
    VarianceNormalization,
)

from conftest import make_leg


# ---------------------------------------------------------------------------
# Conditional
# ---------------------------------------------------------------------------


def test_conditional_plain_ratio():
    out = conditional_index(np.array([0.3]), np.array([0.6]), floor=0.01)
    assert out.values[0] == pytest.approx(0.5)  # 0.3 / 0.6, hand arithmetic


def test_conditional_zero_numerator():
    out = conditional_index(np.array([0.0]), np.array([0.4]), floor=0.01)
    assert out.values[0] == 0.0


def test_conditional_clip_to_last_uses_last_valid():
    joint = np.array([0.30, 0.005])
    denom = np.array([0.60, 0.004])
    out = conditional_index(joint, denom, floor=0.01, floor_action=FloorAction.CLIP_TO_LAST)
    assert out.values[1] == pytest.approx(0.5)  # carried from the valid tick
    out2 = conditional_index(
        np.array([0.005]), np.array([0.004]), floor=0.01,
        floor_action=FloorAction.CLIP_TO_LAST, last_valid=0.62,
    )
    assert out2.values[0] == pytest.approx(0.62)


def test_conditional_clip_default_when_never_valid():
    out = conditional_index(np.array([0.001]), np.array([0.001]), floor=0.01)
    assert out.values[0] == 0.5


def test_conditional_halt_flags_gap():
    joint = np.array([0.3, 0.005, 0.3])
    denom = np.array([0.6, 0.004, 0.6])
    out = conditional_index(joint, denom, floor=0.01, floor_action=FloorAction.HALT)
    assert list(out.gap_mask) == [False, True, False]
    assert np.all(np.isfinite(out.values))


def test_conditional_clamped_to_unit_interval():
    out = conditional_index(np.array([0.5]), np.array([0.2]), floor=0.01)
    assert out.values[0] == 1.0  # transient joint > denom clamps


def test_negrisk_conditional_formula():
    out = negrisk_conditional(np.array([0.2]), np.array([0.6]), floor=0.01)
    assert out.values[0] == pytest.approx(0.2 / (1.0 - 0.6))  # = 0.5


def test_negrisk_conditional_zero_numerator():
    out = negrisk_conditional(np.array([0.0]), np.array([0.3]), floor=0.01)
    assert out.values[0] == 0.0


def test_negrisk_conditional_halt_on_tiny_complement():
    out = negrisk_conditional(
        np.array([0.2]), np.array([0.995]), floor=0.01, floor_action=FloorAction.HALT
    )
    assert out.gap_mask[0]


def test_negrisk_conditional_same_leg_rejected():
    with pytest.raises(SameLegError):
        negrisk_conditional(
            np.array([0.2]), np.array([0.2]), floor=0.01, leg_i="x", leg_j="x"
        )


@settings(max_examples=200, deadline=None)
@given(
    joint=st.floats(0.0, 1.0),
    joint2=st.floats(0.0, 1.0),
    denom=st.floats(0.02, 1.0),
)
def test_conditional_monotone_in_joint_above_floor(joint, joint2, denom):
    lo, hi = sorted([joint, joint2])
    v_lo = conditional_index(np.array([lo]), np.array([denom]), floor=0.01).values[0]
    v_hi = conditional_index(np.array([hi]), np.array([denom]), floor=0.01).values[0]
    assert v_lo <= v_hi


def test_conditional_never_emits_non_finite_on_vanishing_denominator():
    n = 500
    denom = np.linspace(0.2, 0.0, n)
    joint = np.linspace(0.1, 0.0, n)
    for action in (FloorAction.CLIP_TO_LAST, FloorAction.HALT):
        out = conditional_index(joint, denom, floor=0.01, floor_action=action)
        assert np.all(np.isfinite(out.values))
        assert np.all((out.values >= 0.0) & (out.values <= 1.0))


# ---------------------------------------------------------------------------
# Spread
# ---------------------------------------------------------------------------


def test_spread_symmetric_legs_cancel():
    out = spread_index(np.array([0.7]), np.array([0.7]))
    assert out.values[0] == 0.0


def test_spread_hand_value():
    out = spread_index(np.array([0.35]), np.array([0.60]))
    assert out.values[0] == pytest.approx(-0.25)


def test_spread_residual_then_terminal():
    out = spread_index(np.array([0.9]), np.array([0.4]), frozen={"a": 1})
    assert out.values[0] == pytest.approx(0.6)  # 1 - 0.4
    terminal = spread_index(np.array([0.9]), np.array([0.4]), frozen={"a": 1, "b": 0})
    assert terminal.values[0] == 1.0


@settings(max_examples=200, deadline=None)
@given(
    a=st.floats(0.0, 1.0),
    b=st.floats(0.0, 1.0),
)
def test_spread_antisymmetry(a, b):
    ab = spread_index(np.array([a]), np.array([b])).values[0]
    ba = spread_index(np.array([b]), np.array([a])).values[0]
    assert ab == -ba


# ---------------------------------------------------------------------------
# Basket
# ---------------------------------------------------------------------------


def test_basket_equal_weights():
    out = basket_index([np.array([0.4]), np.array([0.8])], [0.5, 0.5])
    assert out.values[0] == pytest.approx(0.6)


def test_basket_terminal_outcome_vector():
    # 0.5*1 + 0.3*0 + 0.2*1, cross-checked by enumeration in settlement tests
    out = basket_index(
        [np.array([1.0]), np.array([0.0]), np.array([1.0])], [0.5, 0.3, 0.2]
    )
    assert out.values[0] == pytest.approx(0.7)


def test_basket_all_zero():
    out = basket_index([np.array([0.0]), np.array([0.0])], [0.5, 0.5])
    assert out.values[0] == 0.0


def test_basket_weight_mismatch():
    with pytest.raises(WeightMismatchError):
        basket_index([np.array([0.5])], [0.5, 0.5])


def test_basket_single_leg_passthrough(rng):
    values = rng.uniform(0, 1, size=64)
    legs = [values, rng.uniform(0, 1, size=64)]
    out = basket_index(legs, [1.0, 0.0])
    assert np.array_equal(out.values, values)


def test_rebalance_none_is_identity():
    w, record = rebalance_weights((0.5, 0.3, 0.2), 1, RebalanceRule.NONE)
    assert w == (0.5, 0.3, 0.2)
    assert record is None


def test_rebalance_drop_single_survivor():
    w, _ = rebalance_weights((0.5, 0.5), 0, RebalanceRule.DROP_ON_RESOLUTION)
    assert w == (0.0, 1.0)


def test_rebalance_drop_renormalizes():
    # Survivors (0.5, 0.2) renormalize over their own mass 0.7 so the
    # post-drop vector sums to exactly one.
    w, _ = rebalance_weights((0.5, 0.3, 0.2), 1, RebalanceRule.DROP_ON_RESOLUTION)
    assert w == pytest.approx((0.5 / 0.7, 0.0, 0.2 / 0.7))
    assert sum(w) == pytest.approx(1.0, abs=1e-12)


def test_rebalance_drop_no_survivors():
    with pytest.raises(AllLegsResolvedError):
        rebalance_weights((1.0,), 0, RebalanceRule.DROP_ON_RESOLUTION)


def test_rebalance_emits_discontinuity_record():
    w, record = rebalance_weights(
        (0.5, 0.5), 0, RebalanceRule.DROP_ON_RESOLUTION,
        leg_values=[1.0, 0.4], time_ms=777,
    )
    assert isinstance(record, DiscontinuityRecord)
    assert record.time_ms == 777
    assert record.pre_value == pytest.approx(0.7)   # 0.5*1 + 0.5*0.4
    assert record.post_value == pytest.approx(0.4)  # survivor carries all weight


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.01, 1.0), min_size=2, max_size=8), st.data())
def test_rebalance_drop_conserves_mass(raw, data):
    total = sum(raw)
    weights = tuple(x / total for x in raw)
    drop = data.draw(st.integers(0, len(weights) - 1))
    new_w, _ = rebalance_weights(weights, drop, RebalanceRule.DROP_ON_RESOLUTION)
    assert abs(sum(new_w) - 1.0) < 1e-12
    assert new_w[drop] == 0.0


# ---------------------------------------------------------------------------
# Variance
# ---------------------------------------------------------------------------


def brute_force_level_variance(samples: np.ndarray) -> float:
    """Independent oracle: two-pass population variance."""
    mean = samples.sum() / len(samples)
    return float(((samples - mean) ** 2).sum() / len(samples))


def brute_force_increment_variance(samples: np.ndarray, normalize: bool) -> float:
    """Independent oracle: explicit sum of squared consecutive changes."""
    total = 0.0
    for prev, cur in zip(samples[:-1], samples[1:]):
        total += (cur - prev) ** 2
    if normalize:
        total /= len(samples) - 1
    return float(total)


def test_variance_constant_path_is_zero():
    samples = np.full(50, 0.37)
    for estimator in (VarianceEstimator.LEVEL, VarianceEstimator.INCREMENTS):
        out = variance_index(samples, estimator, window_ms=10_000, tick_ms=1_000)
        assert np.all(out.values == 0.0)


def test_variance_level_two_point_extreme_attains_bound():
    # Alternating {0, 1}: each window holds both extremes evenly, attaining
    # the quarter bound of a [0, 1]-valued variable exactly.
    samples = np.array([0.0, 1.0] * 6)
    out = variance_index(samples, VarianceEstimator.LEVEL, window_ms=1_500, tick_ms=500)
    assert brute_force_level_variance(np.array([0.0, 1.0, 0.0, 1.0])) == 0.25
    assert out.values[0] == 0.25
    assert np.max(out.values) <= 0.25 + 1e-12


def test_variance_level_hand_value():
    # Window samples {0.4, 0.5, 0.6}: population variance (0.01+0+0.01)/3.
    samples = np.array([0.4, 0.5, 0.6])
    out = variance_index(samples, VarianceEstimator.LEVEL, window_ms=2_000, tick_ms=1_000)
    expected = brute_force_level_variance(samples)
    assert expected == pytest.approx(0.02 / 3)
    assert out.values[0] == pytest.approx(expected, abs=1e-15)


def test_variance_window_too_short():
    with pytest.raises(WindowTooShortError):
        variance_index(np.array([0.5, 0.5]), VarianceEstimator.LEVEL, 10_000, 1_000)


def test_variance_emission_starts_after_one_window():
    samples = np.linspace(0.2, 0.8, 10)
    ts = np.arange(10) * 1_000
    out = variance_index(
        samples, VarianceEstimator.LEVEL, window_ms=4_000, tick_ms=1_000, timestamps=ts
    )
    assert out.timestamps[0] == 4_000
    assert len(out.values) == 6


@pytest.mark.parametrize("estimator", [VarianceEstimator.LEVEL, VarianceEstimator.INCREMENTS])
@pytest.mark.parametrize("normalization", [VarianceNormalization.PER_WINDOW, VarianceNormalization.NONE])
def test_streaming_matches_brute_force(rng, estimator, normalization):
    window = 20
    samples = rng.uniform(0, 1, size=300)
    stream = StreamingVariance(estimator, window, normalization)
    for i, x in enumerate(samples):
        stream.push(float(x))
        if not stream.ready:
            continue
        if estimator is VarianceEstimator.LEVEL:
            expected = brute_force_level_variance(samples[i - window : i + 1])
        else:
            expected = brute_force_increment_variance(
                samples[i - window : i + 1],
                normalize=normalization is VarianceNormalization.PER_WINDOW,
            )
        assert stream.value() == pytest.approx(expected, abs=1e-12)


# ---------------------------------------------------------------------------
# Entropy
# ---------------------------------------------------------------------------


def test_entropy_peak_at_half():
    assert entropy_value(0.5) == 1.0


def test_entropy_boundaries_exact_zero():
    assert entropy_value(0.0) == 0.0
    assert entropy_value(1.0) == 0.0


def test_entropy_quarter_value():
    # -0.25*log2(0.25) - 0.75*log2(0.75), independent evaluation
    expected = 0.25 * 2.0 + 0.75 * math.log2(4.0 / 3.0)
    assert expected == pytest.approx(0.8112781244591328)
    assert entropy_value(0.25) == pytest.approx(expected, abs=1e-15)


@settings(max_examples=300, deadline=None)
@given(st.floats(0.0, 1.0))
def test_entropy_symmetry(p):
    assert entropy_value(p) == pytest.approx(entropy_value(1.0 - p), abs=1e-12)
    assert 0.0 <= entropy_value(p) <= 1.0


def test_entropy_index_over_series():
    out = entropy_index(np.array([0.0, 0.25, 0.5, 1.0]))
    assert list(out.values) == [
        0.0,
        pytest.approx(0.8112781244591328),
        1.0,
        0.0,
    ]


# ---------------------------------------------------------------------------
# Liquidity
# ---------------------------------------------------------------------------


def _micro_leg(leg_id, mids, half_spread=None, depth=None, volume=None):
    pairs = [(i * 1000, m) for i, m in enumerate(mids)]
    return make_leg(leg_id, pairs, half_spread=half_spread, depth=depth, volume=volume)


def test_liquidity_median_half_spread():
    legs = [
        _micro_leg("a", [0.5, 0.5], half_spread=[0.002, 0.002]),
        _micro_leg("b", [0.5, 0.5], half_spread=[0.004, 0.004]),
        _micro_leg("c", [0.5, 0.5], half_spread=[0.010, 0.010]),
    ]
    ts = np.array([0, 1000], dtype=np.int64)
    out = liquidity_index(legs, LiquidityMeasure.MEDIAN_HALF_SPREAD, ts)
    assert out.values[0] == pytest.approx(0.004)


def test_liquidity_amihud_ratio():
    leg = _micro_leg("a", [0.50, 0.52], volume=[500.0, 1000.0])
    ts = np.array([0, 1000], dtype=np.int64)
    out = liquidity_index([leg], LiquidityMeasure.AMIHUD, ts)
    assert out.values[0] == pytest.approx(1000.0 / 0.02)  # = 50000


def test_liquidity_amihud_floor():
    leg = _micro_leg("a", [0.5, 0.5], volume=[5.0, 10.0])
    ts = np.array([0, 1000], dtype=np.int64)
    out = liquidity_index([leg], LiquidityMeasure.AMIHUD, ts)
    assert out.values[0] == pytest.approx(10.0 / AMIHUD_PRICE_FLOOR)  # = 1e7


def test_liquidity_depth_mean():
    legs = [
        _micro_leg("a", [0.5], depth=[100.0]),
        _micro_leg("b", [0.5], depth=[300.0]),
    ]
    ts = np.array([0], dtype=np.int64)
    out = liquidity_index(legs, LiquidityMeasure.DEPTH, ts)
    assert out.values[0] == pytest.approx(200.0)


def test_liquidity_missing_series():
    leg = _micro_leg("a", [0.5])
    with pytest.raises(MissingMicrostructureSeriesError):
        liquidity_index([leg], LiquidityMeasure.DEPTH, np.array([0], dtype=np.int64))


# ---------------------------------------------------------------------------
# Funding target
# ---------------------------------------------------------------------------


def test_funding_target_basis_signed():
    out = funding_target("basis", mark=np.array([0.55]), index=np.array([0.52]))
    assert out.values[0] == pytest.approx(0.03)
    zero = funding_target("basis", mark=np.array([0.5]), index=np.array([0.5]))
    assert zero.values[0] == 0.0


def test_funding_target_divergence_absolute():
    out = funding_target("divergence", series_a=np.array([0.60]), series_b=np.array([0.55]))
    assert out.values[0] == pytest.approx(0.05)
    flipped = funding_target("divergence", series_a=np.array([0.55]), series_b=np.array([0.60]))
    assert flipped.values[0] == pytest.approx(0.05)


def test_funding_target_disagreement_unreachable():
    with pytest.raises(ValueError):
        funding_target("disagreement", mark=np.array([0.5]), index=np.array([0.5]))


# ---------------------------------------------------------------------------
# Support containment (constructor-level randomized sweep)
# ---------------------------------------------------------------------------


def test_support_containment_randomized(rng):
    n = 2_000
    joint = rng.uniform(0, 1, n)
    denom = rng.uniform(0, 1, n)
    cond = conditional_index(joint, denom, floor=0.01)
    assert np.all((cond.values >= 0.0) & (cond.values <= 1.0))

    a, b = rng.uniform(0, 1, n), rng.uniform(0, 1, n)
    spr = spread_index(a, b)
    assert np.all((spr.values >= -1.0) & (spr.values <= 1.0))

    legs = [rng.uniform(0, 1, n) for _ in range(4)]
    raw_w = rng.uniform(0.1, 1.0, 4)
    weights = (raw_w / raw_w.sum()).tolist()
    bsk = basket_index(legs, weights)
    assert np.all((bsk.values >= 0.0) & (bsk.values <= 1.0))

    ent = entropy_index(rng.uniform(0, 1, n))
    assert np.all((ent.values >= 0.0) & (ent.values <= 1.0))

    path = rng.uniform(0, 1, n)
    var = variance_index(path, VarianceEstimator.LEVEL, window_ms=20_000, tick_ms=1_000)
    assert np.all(var.values <= 0.25 + 1e-12)
    assert np.all(var.values >= 0.0)


def test_weighted_sum_left_to_right_order():
    # The settlement path and the enumeration oracle share this exact
    # summation order, so terminal values compare exactly.
    w = [0.1, 0.2, 0.7]
    v = [1.0, 0.0, 1.0]
    manual = ((0.0 + 0.1 * 1.0) + 0.2 * 0.0) + 0.7 * 1.0
    assert weighted_sum(w, v) == manual
