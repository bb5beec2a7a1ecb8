"""Pydantic request/response models for the replay service."""

from __future__ import annotations

from typing import Any, Optional

from pydantic import BaseModel, Field

from ..model import LegSeries, NegRiskGroup, ProbabilityPoint, ResolutionRecord


class ResolutionIn(BaseModel):
    tau_ms: int
    outcome: int


class LegSeriesIn(BaseModel):
    leg_id: str
    points: list[tuple[int, float]] = Field(description="(t_ms, mid) pairs")
    half_spread: Optional[list[float]] = None
    depth_200bps: Optional[list[float]] = None
    volume: Optional[list[float]] = None
    resolution: Optional[ResolutionIn] = None

    def to_domain(self) -> LegSeries:
        return LegSeries(
            leg_id=self.leg_id,
            points=tuple(ProbabilityPoint(t, v) for t, v in self.points),
            half_spread=tuple(self.half_spread) if self.half_spread is not None else None,
            depth_200bps=tuple(self.depth_200bps) if self.depth_200bps is not None else None,
            volume=tuple(self.volume) if self.volume is not None else None,
            resolution=(
                ResolutionRecord(self.resolution.tau_ms, self.resolution.outcome)
                if self.resolution is not None
                else None
            ),
        )


class NegRiskGroupIn(BaseModel):
    group_id: str
    members: list[str]

    def to_domain(self) -> NegRiskGroup:
        return NegRiskGroup(self.group_id, tuple(self.members))


class BuildIndexRequest(BaseModel):
    variant: dict[str, Any]
    legs: list[LegSeriesIn]
    groups: list[NegRiskGroupIn] = []
    grid_ms: int = 1000


class IndexSeriesOut(BaseModel):
    provenance: str
    support: tuple[float | None, float | None]
    timestamps: list[int]
    values: list[float]
    discontinuities: list[dict[str, Any]] = []
    floor_halts: list[tuple[int, int]] = []


class ReplayRequest(BaseModel):
    variant: dict[str, Any]
    risk: dict[str, Any] = {}
    replay: dict[str, Any] = {}
    legs: list[LegSeriesIn]
    groups: list[NegRiskGroupIn] = []


class ReplayResponse(BaseModel):
    records: list[dict[str, Any]]


class GenerateBridgeRequest(BaseModel):
    seed: int = 0
    horizon_ms: int = 86_400_000
    grid_ms: int = 60_000
    p0: float = 0.5
    leg_id: str = "leg"


class GenerateNegRiskRequest(BaseModel):
    seed: int = 0
    legs: int = 3
    horizon_ms: int = 86_400_000
    grid_ms: int = 60_000
    group_id: str = "group"


class LegSeriesOut(BaseModel):
    leg_id: str
    points: list[tuple[int, float]]
    resolution: Optional[ResolutionIn] = None

    @classmethod
    def from_domain(cls, leg: LegSeries) -> "LegSeriesOut":
        return cls(
            leg_id=leg.leg_id,
            points=[(p.time_ms, p.value) for p in leg.points],
            resolution=(
                ResolutionIn(tau_ms=leg.resolution.tau_ms, outcome=leg.resolution.outcome)
                if leg.resolution is not None
                else None
            ),
        )


class GenerateResponse(BaseModel):
    legs: list[LegSeriesOut]
    group: Optional[NegRiskGroupIn] = None


class TaxonomyResponse(BaseModel):
    table: str
    data: dict[str, Any]
    rendered: str
