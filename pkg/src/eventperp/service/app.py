"""FastAPI service wrapping the engine: index construction, full replays,
synthetic data, and the static reference tables.

The service is stateless; every request carries its own data and
configuration, and identical requests produce identical responses.
"""

from __future__ import annotations

import math

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..config import parse_replay, parse_risk, parse_variant
from ..errors import ConfigError, EventPerpError, SpecValidationError
from ..fileio import report_to_records
from ..indexing import build_contract_index
from ..replay import replay
from ..synth import generate_bridge_path, generate_negrisk_group
from ..taxonomy import print_taxonomy, taxonomy_data
from .schemas import (
    BuildIndexRequest,
    GenerateBridgeRequest,
    GenerateNegRiskRequest,
    GenerateResponse,
    IndexSeriesOut,
    LegSeriesOut,
    NegRiskGroupIn,
    ReplayRequest,
    ReplayResponse,
    TaxonomyResponse,
)

app = FastAPI(
    title="eventperp",
    description="Deterministic engine and replay simulator for event-linked perpetual variants",
    version=__version__,
)


def _validation_detail(exc: SpecValidationError) -> list[dict]:
    return [{"code": e.code, "field": e.field, "message": e.message} for e in exc.errors]


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "version": __version__}


@app.post("/v1/index", response_model=IndexSeriesOut)
def build_index(request: BuildIndexRequest) -> IndexSeriesOut:
    try:
        spec = parse_variant(request.variant)
        legs = {leg.leg_id: leg.to_domain() for leg in request.legs}
        groups = [g.to_domain() for g in request.groups]
        contract = build_contract_index(spec, legs, groups, grid_ms=request.grid_ms)
    except SpecValidationError as exc:
        raise HTTPException(status_code=422, detail=_validation_detail(exc)) from exc
    except (ConfigError, EventPerpError, ValueError) as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    lo, hi = contract.series.support
    return IndexSeriesOut(
        provenance=contract.series.provenance,
        support=(lo if math.isfinite(lo) else None, hi if math.isfinite(hi) else None),
        timestamps=[int(t) for t in contract.series.timestamps],
        values=[float(v) for v in contract.series.values],
        discontinuities=[
            {"t_ms": d.time_ms, "pre": d.pre_value, "post": d.post_value, "cause": d.cause}
            for d in contract.discontinuities
        ],
        floor_halts=list(contract.floor_halts),
    )


@app.post("/v1/replay", response_model=ReplayResponse)
def run_replay(request: ReplayRequest) -> ReplayResponse:
    try:
        spec = parse_variant(request.variant)
        risk = parse_risk(request.risk)
        rep = parse_replay(request.replay, risk)
        legs = {leg.leg_id: leg.to_domain() for leg in request.legs}
        groups = [g.to_domain() for g in request.groups]
        report = replay(spec, legs, rep, groups)
    except SpecValidationError as exc:
        raise HTTPException(status_code=422, detail=_validation_detail(exc)) from exc
    except (ConfigError, EventPerpError, ValueError) as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    return ReplayResponse(records=report_to_records(report))


@app.post("/v1/generate/bridge", response_model=GenerateResponse)
def generate_bridge(request: GenerateBridgeRequest) -> GenerateResponse:
    try:
        leg = generate_bridge_path(
            request.seed, request.horizon_ms, request.grid_ms, request.p0, request.leg_id
        )
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    return GenerateResponse(legs=[LegSeriesOut.from_domain(leg)])


@app.post("/v1/generate/negrisk", response_model=GenerateResponse)
def generate_negrisk(request: GenerateNegRiskRequest) -> GenerateResponse:
    try:
        legs, group = generate_negrisk_group(
            request.seed, request.legs, request.horizon_ms, request.grid_ms, request.group_id
        )
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    return GenerateResponse(
        legs=[LegSeriesOut.from_domain(leg) for leg in legs],
        group=NegRiskGroupIn(group_id=group.group_id, members=list(group.members)),
    )


@app.get("/v1/taxonomy/{table}", response_model=TaxonomyResponse)
def taxonomy(table: str) -> TaxonomyResponse:
    try:
        return TaxonomyResponse(
            table=table, data=taxonomy_data(table), rendered=print_taxonomy(table)
        )
    except ValueError as exc:
        raise HTTPException(status_code=404, detail=str(exc)) from exc
