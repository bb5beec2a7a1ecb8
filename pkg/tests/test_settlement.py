"""Settlement lifecycle: termination rules, ordering rules, residual
hand-off, terminal-set exactness, and the absorbing phase machine."""

from __future__ import annotations

import itertools

import numpy as np
import pytest

from eventperp.constructors import IndexSeries, weighted_sum
from eventperp.errors import EmptyWindowError, UnexpectedLegError
from eventperp.model import (
    Basket,
    Conditional,
    ContractState,
    OrderingRule,
    Phase,
    RebalanceRule,
    Resolution,
    ResolutionRecord,
    TerminationRule,
    WeightRule,
)
from eventperp.settlement import (
    BasketLifecycle,
    ConditionalLifecycle,
    SettlementKind,
    basket_terminal_set,
    settle_basket,
    settle_conditional,
    settle_entropy,
    settle_spread,
    twap,
)


def _index(pairs):
    ts = np.array([t for t, _ in pairs], dtype=np.int64)
    vals = np.array([v for _, v in pairs], dtype=np.float64)
    return IndexSeries(ts, vals, (0.0, 1.0), "conditional")


def _res(time_ms, leg, outcome):
    return Resolution(time_ms, leg, ResolutionRecord(tau_ms=time_ms, outcome=outcome))


# ---------------------------------------------------------------------------
# TWAP
# ---------------------------------------------------------------------------


def test_twap_constant_series():
    idx = _index([(0, 0.4), (5_000, 0.4)])
    assert twap(idx, 10_000, 8_000) == pytest.approx(0.4)


def test_twap_equal_duration_halves():
    idx = _index([(0, 0.2), (5_000, 0.6)])
    assert twap(idx, 10_000, 10_000) == pytest.approx(0.4)


def test_twap_before_first_observation():
    idx = _index([(10_000, 0.5)])
    with pytest.raises(EmptyWindowError):
        twap(idx, 5_000, 4_000)


def test_twap_bounded_by_window_extremes(rng):
    pairs = [(int(i * 1000), float(v)) for i, v in enumerate(rng.uniform(0, 1, 50))]
    idx = _index(pairs)
    value = twap(idx, 49_000, 20_000)
    window_vals = [v for t, v in pairs if 29_000 - 1000 <= t <= 49_000]
    assert min(window_vals) - 1e-12 <= value <= max(window_vals) + 1e-12


# ---------------------------------------------------------------------------
# Conditional
# ---------------------------------------------------------------------------


def _cond_spec(**kw):
    defaults = dict(leg_a="A", leg_b="B", joint_leg="J")
    defaults.update(kw)
    return Conditional(**defaults)


def test_conditioning_fails_fixed_rule():
    spec = _cond_spec(termination_rule=TerminationRule.fixed(0.5))
    state = ContractState()
    record = settle_conditional(
        state, _res(1_000, "B", 0), ConditionalLifecycle(spec), _index([(0, 0.3)])
    )
    assert record.kind is SettlementKind.EARLY_TERMINATION
    assert record.value == 0.5
    assert state.phase is Phase.TERMINATED_EARLY


def test_conditioning_fails_twap_of_constant():
    spec = _cond_spec(termination_rule=TerminationRule.twap(86_400_000))
    state = ContractState()
    record = settle_conditional(
        state, _res(90_000_000, "B", 0), ConditionalLifecycle(spec),
        _index([(0, 0.3), (50_000_000, 0.3)]),
    )
    assert record.value == pytest.approx(0.3)


def test_conditioning_fails_last_tick():
    spec = _cond_spec(termination_rule=TerminationRule.last_tick())
    state = ContractState()
    record = settle_conditional(
        state, _res(10_000, "B", 0), ConditionalLifecycle(spec),
        _index([(0, 0.3), (9_000, 0.62)]),
    )
    assert record.value == pytest.approx(0.62)


def test_conditioning_holds_then_tracked_leg_collapses():
    spec = _cond_spec()
    state = ContractState()
    lifecycle = ConditionalLifecycle(spec)
    idx = _index([(0, 0.3)])
    assert settle_conditional(state, _res(1_000, "B", 1), lifecycle, idx) is None
    assert state.phase is Phase.ACTIVE
    record = settle_conditional(state, _res(2_000, "A", 1), lifecycle, idx)
    assert record.kind is SettlementKind.TERMINAL
    assert record.value == 1.0
    assert state.phase is Phase.RESOLVED


def test_tracked_first_settle_at_a():
    spec = _cond_spec(ordering_rule=OrderingRule.SETTLE_AT_A)
    state = ContractState()
    record = settle_conditional(
        state, _res(1_000, "A", 1), ConditionalLifecycle(spec), _index([(0, 0.3)])
    )
    assert record.kind is SettlementKind.TERMINAL
    assert record.value == 1.0


@pytest.mark.parametrize("ra,rb,expected", [(1, 1, 1.0), (1, 0, 0.0), (0, 1, 0.0)])
def test_tracked_first_joint_at_b(ra, rb, expected):
    spec = _cond_spec(ordering_rule=OrderingRule.JOINT_AT_B)
    state = ContractState()
    lifecycle = ConditionalLifecycle(spec)
    idx = _index([(0, 0.3)])
    assert settle_conditional(state, _res(1_000, "A", ra), lifecycle, idx) is None
    record = settle_conditional(state, _res(2_000, "B", rb), lifecycle, idx)
    assert record.kind is SettlementKind.TERMINAL
    assert record.value == expected  # joint outcome R_A * R_B


def test_simultaneous_resolution_order_independent():
    idx = _index([(0, 0.3)])
    for rb, expected_kind in ((0, SettlementKind.EARLY_TERMINATION), (1, SettlementKind.TERMINAL)):
        outcomes = []
        for order in (("A", "B"), ("B", "A")):
            spec = _cond_spec(termination_rule=TerminationRule.fixed(0.5))
            state = ContractState()
            lifecycle = ConditionalLifecycle(spec)
            events = {"A": _res(5_000, "A", 1), "B": _res(5_000, "B", rb)}
            first, second = order
            r1 = settle_conditional(
                state, events[first], lifecycle, idx, pending_same_time={second}
            )
            assert r1 is None  # freeze first, valuate on the last co-event
            r2 = settle_conditional(state, events[second], lifecycle, idx)
            outcomes.append((r2.kind, r2.value))
        assert outcomes[0] == outcomes[1]
        assert outcomes[0][0] is expected_kind


def test_conditional_unexpected_leg():
    spec = _cond_spec()
    with pytest.raises(UnexpectedLegError):
        settle_conditional(
            ContractState(), _res(0, "Z", 1), ConditionalLifecycle(spec), _index([(0, 0.3)])
        )


# ---------------------------------------------------------------------------
# Spread
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("ra,rb,expected", [(1, 1, 0.0), (0, 1, -1.0), (1, 0, 1.0), (0, 0, 0.0)])
def test_spread_terminal_values(ra, rb, expected):
    state = ContractState()
    assert settle_spread(state, _res(1_000, "A", ra), "A", "B") is None
    assert state.phase is Phase.ACTIVE  # residual tracking continues
    record = settle_spread(state, _res(2_000, "B", rb), "A", "B")
    assert record.kind is SettlementKind.TERMINAL
    assert record.value == expected
    assert record.value in (-1.0, 0.0, 1.0)


def test_spread_simultaneous_single_step():
    state = ContractState()
    assert settle_spread(state, _res(1_000, "A", 0), "A", "B") is None
    record = settle_spread(state, _res(1_000, "B", 1), "A", "B")
    assert record.value == -1.0


def test_spread_unexpected_leg():
    with pytest.raises(UnexpectedLegError):
        settle_spread(ContractState(), _res(0, "Z", 1), "A", "B")


# ---------------------------------------------------------------------------
# Basket
# ---------------------------------------------------------------------------


def _basket_spec(n, rebalance=RebalanceRule.NONE, weights=None):
    legs = tuple(f"L{i}" for i in range(n))
    if weights is None:
        return Basket(legs=legs, weight_rule=WeightRule.EQUAL, rebalance_rule=rebalance)
    return Basket(
        legs=legs, weight_rule=WeightRule.STATIC, weights=weights, rebalance_rule=rebalance
    )


def test_basket_no_rebalance_terminal():
    spec = _basket_spec(3, weights=(0.5, 0.3, 0.2))
    state = ContractState()
    lifecycle = BasketLifecycle.start(spec, spec.weights)
    assert settle_basket(state, _res(1_000, "L0", 1), lifecycle) is None
    assert settle_basket(state, _res(2_000, "L1", 0), lifecycle) is None
    record = settle_basket(state, _res(3_000, "L2", 1), lifecycle)
    assert record.kind is SettlementKind.TERMINAL
    assert record.value == pytest.approx(0.7)
    assert state.phase is Phase.RESOLVED


def test_basket_terminal_exact_member_of_enumerated_set():
    weights = (0.37, 0.21, 0.42)
    spec = _basket_spec(3, weights=weights)
    terminal_set = basket_terminal_set(weights)
    for outcomes in itertools.product((0, 1), repeat=3):
        state = ContractState()
        lifecycle = BasketLifecycle.start(spec, weights)
        record = None
        for i, outcome in enumerate(outcomes):
            record = settle_basket(state, _res(1_000 + i, f"L{i}", outcome), lifecycle)
        assert record.value in terminal_set  # exact float membership


def test_basket_brute_force_equivalence_up_to_k10(rng):
    for k in range(1, 11):
        raw = rng.uniform(0.05, 1.0, size=k)
        weights = tuple(float(w) for w in raw / raw.sum())
        outcomes = [int(v) for v in rng.integers(0, 2, size=k)]
        spec = _basket_spec(k, weights=weights)
        state = ContractState()
        lifecycle = BasketLifecycle.start(spec, weights)
        record = None
        for i, outcome in enumerate(outcomes):
            record = settle_basket(state, _res(1_000 + i, f"L{i}", outcome), lifecycle)
        # Enumerate the full outcome lattice; the realized vector's element
        # must equal the settlement value exactly.
        expected = weighted_sum(weights, [float(v) for v in outcomes])
        assert record.value == expected
        assert record.value in basket_terminal_set(weights)


def test_basket_all_zero_outcomes():
    spec = _basket_spec(2, weights=(0.5, 0.5))
    state = ContractState()
    lifecycle = BasketLifecycle.start(spec, spec.weights)
    settle_basket(state, _res(1, "L0", 0), lifecycle)
    record = settle_basket(state, _res(2, "L1", 0), lifecycle)
    assert record.value == 0.0


def test_basket_unexpected_leg():
    spec = _basket_spec(2, weights=(0.5, 0.5))
    with pytest.raises(UnexpectedLegError):
        settle_basket(ContractState(), _res(0, "Z", 1), BasketLifecycle.start(spec, spec.weights))


# ---------------------------------------------------------------------------
# Entropy
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("outcome", [0, 1])
def test_entropy_collapses_to_exact_zero(outcome):
    state = ContractState()
    record = settle_entropy(state, _res(9_000, "E", outcome), "E")
    assert record.kind is SettlementKind.TERMINAL
    assert record.value == 0.0
    assert state.phase is Phase.RESOLVED


def test_entropy_collapse_ignores_pre_resolution_level():
    # Even from a near-peak entropy reading the settlement is exactly zero.
    state = ContractState()
    record = settle_entropy(state, _res(9_000, "E", 1), "E")
    assert record.value == 0.0


# ---------------------------------------------------------------------------
# Phase machine under post-settlement events
# ---------------------------------------------------------------------------


def test_post_settlement_events_are_absorbed():
    state = ContractState()
    record = settle_spread(state, _res(1, "A", 1), "A", "B")
    assert record is None
    record = settle_spread(state, _res(2, "B", 0), "A", "B")
    assert record is not None
    # Re-feeding resolutions after the terminal state must not transition.
    assert settle_spread(state, _res(3, "A", 1), "A", "B") is None
    assert settle_spread(state, _res(4, "B", 0), "A", "B") is None
    assert state.phase is Phase.RESOLVED
