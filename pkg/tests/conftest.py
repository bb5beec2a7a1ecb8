from __future__ import annotations

import numpy as np
import pytest

from eventperp.model import LegSeries, ProbabilityPoint, ResolutionRecord


def make_leg(
    leg_id: str,
    pairs: list[tuple[int, float]],
    tau_ms: int | None = None,
    outcome: int | None = None,
    half_spread: list[float] | None = None,
    depth: list[float] | None = None,
    volume: list[float] | None = None,
) -> LegSeries:
    return LegSeries(
        leg_id=leg_id,
        points=tuple(ProbabilityPoint(t, v) for t, v in pairs),
        half_spread=tuple(half_spread) if half_spread is not None else None,
        depth_200bps=tuple(depth) if depth is not None else None,
        volume=tuple(volume) if volume is not None else None,
        resolution=(
            ResolutionRecord(tau_ms=tau_ms, outcome=outcome) if tau_ms is not None else None
        ),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
