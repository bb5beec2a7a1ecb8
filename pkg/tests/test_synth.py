"""Synthetic generators: interior bounds, terminal absorption, simplex
consistency, determinism, and the outcome-frequency Monte Carlo check."""

from __future__ import annotations

import numpy as np
import pytest

from eventperp.model import validate_negrisk_group
from eventperp.synth import generate_bridge_path, generate_negrisk_group, ou_overlay

H = 60_000


def test_bridge_values_strictly_interior_and_terminal_approach():
    for seed in range(25):
        leg = generate_bridge_path(seed=seed, horizon_ms=500 * H, grid_ms=H)
        values = np.array([p.value for p in leg.points])
        assert np.all((values > 0.0) & (values < 1.0))
        outcome = leg.resolution.outcome
        assert abs(values[-1] - outcome) <= 1e-3
        assert leg.resolution.tau_ms == 500 * H


def test_bridge_deterministic_per_seed():
    a = generate_bridge_path(seed=42, horizon_ms=100 * H, grid_ms=H)
    b = generate_bridge_path(seed=42, horizon_ms=100 * H, grid_ms=H)
    assert a == b
    c = generate_bridge_path(seed=43, horizon_ms=100 * H, grid_ms=H)
    assert c != a


def test_bridge_starts_at_p0():
    leg = generate_bridge_path(seed=5, horizon_ms=100 * H, grid_ms=H, p0=0.7)
    assert leg.points[0].value == pytest.approx(0.7, abs=1e-9)


def test_bridge_outcome_frequency_symmetric():
    # Monte Carlo oracle over seeds: a driftless start at 0.5 resolves YES
    # half the time.
    outcomes = [
        generate_bridge_path(seed=s, horizon_ms=20 * H, grid_ms=H).resolution.outcome
        for s in range(10_000)
    ]
    freq = float(np.mean(outcomes))
    assert abs(freq - 0.5) <= 0.02


def test_bridge_rejects_bad_args():
    with pytest.raises(ValueError):
        generate_bridge_path(seed=0, horizon_ms=100 * H, grid_ms=H, p0=0.0)
    with pytest.raises(ValueError):
        generate_bridge_path(seed=0, horizon_ms=H, grid_ms=H)


def test_negrisk_sums_to_one_everywhere():
    legs, group = generate_negrisk_group(seed=9, k=3, horizon_ms=200 * H, grid_ms=H)
    values = np.vstack([[p.value for p in leg.points] for leg in legs])
    sums = values.sum(axis=0)
    assert np.all(np.abs(sums - 1.0) <= 1e-12)
    by_id = {leg.leg_id: leg for leg in legs}
    assert validate_negrisk_group(group, by_id, grid_ms=H) == []


def test_negrisk_exactly_one_winner():
    for seed in range(20):
        legs, _ = generate_negrisk_group(seed=seed, k=4, horizon_ms=50 * H, grid_ms=H)
        outcomes = [leg.resolution.outcome for leg in legs]
        assert sum(outcomes) == 1


def test_negrisk_pair_is_complementary():
    legs, _ = generate_negrisk_group(seed=3, k=2, horizon_ms=100 * H, grid_ms=H)
    a = np.array([p.value for p in legs[0].points])
    b = np.array([p.value for p in legs[1].points])
    assert np.all(np.abs(a + b - 1.0) <= 1e-12)


def test_negrisk_deterministic_per_seed():
    one = generate_negrisk_group(seed=77, k=3, horizon_ms=50 * H, grid_ms=H)
    two = generate_negrisk_group(seed=77, k=3, horizon_ms=50 * H, grid_ms=H)
    assert one == two


def test_ou_overlay_seeded_and_zero_start():
    ts = list(range(0, 100 * H, H))
    a = ou_overlay(1, ts, scale=0.01)
    b = ou_overlay(1, ts, scale=0.01)
    assert np.array_equal(a, b)
    assert a[0] == 0.0
    assert not np.array_equal(a, ou_overlay(2, ts, scale=0.01))
