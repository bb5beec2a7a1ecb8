"""Seeded synthetic data: bounded probability paths with terminal
absorption, mutually exclusive leg groups on the simplex, and a
mean-reverting mark-basis overlay.

All generators are fully determined by their seed. The probability path is
the standard bridge construction p_t = Phi(W_t / sqrt(T - t)) for a Gaussian
walk W, which stays strictly inside (0, 1) and converges to {0, 1} as t
approaches the horizon; the resolution outcome is the limit value. The
group generator normalizes positive latent walks onto the simplex, which
sacrifices per-leg martingality in exchange for an exact sum-to-one
invariant.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from scipy.special import ndtr, ndtri

from .model import LegSeries, NegRiskGroup, ProbabilityPoint, ResolutionRecord

#: The final pre-resolution tick is squashed to within this distance of the
#: outcome, mimicking the observed pre-resolution convergence of event mids.
TERMINAL_APPROACH = 1e-4

#: Strict interior bound for emitted probabilities.
INTERIOR_EPS = 1e-9


def generate_bridge_path(
    seed: int,
    horizon_ms: int,
    grid_ms: int,
    p0: float = 0.5,
    leg_id: str = "leg",
) -> LegSeries:
    """One seeded probability path absorbing at a binary outcome.

    Points are emitted on the grid strictly before the horizon; the
    resolution record carries tau = horizon and the outcome implied by the
    walk's terminal sign. The last emitted tick is pulled to within
    TERMINAL_APPROACH of the outcome while staying strictly inside (0, 1).
    """
    if not 0.0 < p0 < 1.0:
        raise ValueError("p0 must lie strictly inside (0, 1)")
    if grid_ms <= 0 or horizon_ms <= grid_ms:
        raise ValueError("need 0 < grid_ms < horizon_ms")
    rng = np.random.default_rng(seed)
    times = np.arange(0, horizon_ms, grid_ms, dtype=np.int64)
    n = len(times)
    w0 = float(ndtri(p0)) * math.sqrt(horizon_ms)
    steps = rng.standard_normal(n - 1) * math.sqrt(grid_ms)
    walk = w0 + np.concatenate([[0.0], np.cumsum(steps)])
    remaining = np.sqrt((horizon_ms - times).astype(np.float64))
    probs = ndtr(walk / remaining)
    probs = np.clip(probs, INTERIOR_EPS, 1.0 - INTERIOR_EPS)

    # Outcome: one more step to the horizon decides the terminal sign.
    final_step = float(rng.standard_normal()) * math.sqrt(
        max(horizon_ms - int(times[-1]), grid_ms)
    )
    outcome = 1 if walk[-1] + final_step > 0.0 else 0

    if outcome == 1:
        probs[-1] = max(probs[-1], 1.0 - TERMINAL_APPROACH)
    else:
        probs[-1] = min(probs[-1], TERMINAL_APPROACH)

    points = tuple(
        ProbabilityPoint(int(t), float(p)) for t, p in zip(times, probs)
    )
    return LegSeries(
        leg_id=leg_id,
        points=points,
        resolution=ResolutionRecord(tau_ms=horizon_ms, outcome=outcome),
    )


def generate_negrisk_group(
    seed: int,
    k: int,
    horizon_ms: int,
    grid_ms: int,
    group_id: str = "group",
) -> tuple[list[LegSeries], NegRiskGroup]:
    """k mutually exclusive legs summing to one at every grid point.

    Positive latent geometric walks are normalized onto the simplex; exactly
    one leg resolves YES, drawn proportional to the final weights, and all
    legs share the horizon as resolution time.
    """
    if k < 2:
        raise ValueError("a mutually exclusive group needs k >= 2")
    if grid_ms <= 0 or horizon_ms <= grid_ms:
        raise ValueError("need 0 < grid_ms < horizon_ms")
    rng = np.random.default_rng(seed)
    times = np.arange(0, horizon_ms, grid_ms, dtype=np.int64)
    n = len(times)
    vol = 0.8 / math.sqrt(max(n - 1, 1))
    steps = rng.standard_normal((k, n - 1)) * vol
    latent = np.exp(np.concatenate([np.zeros((k, 1)), np.cumsum(steps, axis=1)], axis=1))
    probs = latent / latent.sum(axis=0, keepdims=True)

    final = probs[:, -1]
    winner = int(rng.choice(k, p=final / final.sum()))

    leg_ids = [f"{group_id}-m{i}" for i in range(k)]
    legs = []
    for i, leg_id in enumerate(leg_ids):
        points = tuple(
            ProbabilityPoint(int(t), float(p)) for t, p in zip(times, probs[i])
        )
        legs.append(
            LegSeries(
                leg_id=leg_id,
                points=points,
                resolution=ResolutionRecord(
                    tau_ms=horizon_ms, outcome=1 if i == winner else 0
                ),
            )
        )
    return legs, NegRiskGroup(group_id=group_id, members=tuple(leg_ids))


def ou_overlay(
    seed: int,
    timestamps: Sequence[int],
    scale: float = 0.01,
    mean_reversion: float = 0.05,
) -> np.ndarray:
    """Seeded mean-reverting basis overlay sampled on the given timestamps;
    added to the index to form a synthetic mark when a non-zero basis
    process is configured."""
    rng = np.random.default_rng(seed)
    ts = np.asarray(timestamps, dtype=np.int64)
    n = len(ts)
    out = np.zeros(n, dtype=np.float64)
    if n == 0:
        return out
    x = 0.0
    shocks = rng.standard_normal(n)
    for i in range(1, n):
        dt = max(float(ts[i] - ts[i - 1]), 1.0) / 3_600_000.0
        x = x * math.exp(-mean_reversion * dt) + scale * math.sqrt(
            max(1.0 - math.exp(-2 * mean_reversion * dt), 1e-12)
        ) * float(shocks[i])
        out[i] = x
    return out
