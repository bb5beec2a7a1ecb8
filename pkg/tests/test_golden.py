"""Golden-file determinism: a handcrafted (RNG-free) spread replay whose
emitted bytes are pinned. Any drift in engine arithmetic, event ordering,
or serialization shows up as a byte diff here."""

from __future__ import annotations

from pathlib import Path

from eventperp.fileio import emit_report_jsonl, load_report_jsonl
from eventperp.model import (
    LegSeries,
    ProbabilityPoint,
    ResolutionRecord,
    Side,
    Spread,
    TraderOrder,
)
from eventperp.replay import ReplayConfig, replay
from eventperp.risk import (
    FundingCorrection,
    FundingParams,
    LeverageSchedule,
    MarginAggregation,
    MarginSchedule,
    RiskConfig,
)

M = 60_000
GOLDEN = Path(__file__).parent / "data" / "golden_report.jsonl"


def _leg(leg_id, vals, tau=None, outcome=None):
    points = tuple(ProbabilityPoint(i * M, v) for i, v in enumerate(vals))
    res = ResolutionRecord(tau, outcome) if tau is not None else None
    return LegSeries(leg_id=leg_id, points=points, resolution=res)


def _golden_replay():
    a = _leg(
        "a",
        [0.62, 0.60, 0.58, 0.57, 0.55, 0.54, 0.52, 0.50, 0.49, 0.48],
        tau=10 * M,
        outcome=1,
    )
    b = _leg(
        "b",
        [0.40, 0.41, 0.43, 0.44, 0.46, 0.47, 0.48, 0.50, 0.52, 0.55, 0.60, 0.70, 0.90],
        tau=14 * M,
        outcome=1,
    )
    config = ReplayConfig(
        grid_ms=M,
        seed=123,
        trader_script=(
            TraderOrder(2 * M, "alpha", Side.LONG, 80.0, 2.0),
            TraderOrder(3 * M, "beta", Side.SHORT, 50.0, 2.0),
        ),
        risk=RiskConfig(
            margin=MarginSchedule(
                base_rate=0.05,
                jump_coeff=1.0,
                proximity_horizon_ms=5 * M,
                aggregation=MarginAggregation.SUM,
            ),
            funding=FundingParams(
                sensitivity=1.0,
                correction=FundingCorrection.PER_LEG_MIN,
                clip=(-0.05, 0.05),
                interval_ms=2 * M,
            ),
            leverage=LeverageSchedule(),
        ),
        halt_enabled=True,
        zone_ms=3 * M,
    )
    return replay(Spread("a", "b"), {"a": a, "b": b}, config)


def test_golden_report_bytes_stable(tmp_path):
    report = _golden_replay()
    emitted = emit_report_jsonl(report, tmp_path / "report.jsonl")
    assert emitted.read_bytes() == GOLDEN.read_bytes()


def test_golden_report_round_trips():
    assert load_report_jsonl(GOLDEN) == _golden_replay()
