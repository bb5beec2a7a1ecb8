"""Data ingestion and report emission.

Tick files are CSV with header ``t_ms,leg_id,mid`` plus optional columns
``bid,ask,half_spread,depth_200bps,volume``; one file may interleave legs.
Resolutions: ``leg_id,tau_ms,outcome``. Groups: ``group_id,leg_id`` pairs.
Reports emit as JSONL (one record per event class, stable field order) or
as a CSV bundle (one file per series plus a summary); both round-trip to an
equal in-memory report. Floats are written with shortest-round-trip repr,
so emitted files are byte-stable across runs.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .constructors import DiscontinuityRecord
from .errors import SchemaError
from .model import LegSeries, NegRiskGroup, ProbabilityPoint, ResolutionRecord
from .replay import (
    LiquidationEvent,
    OrderOutcome,
    ReplayReport,
    RollEvent,
)
from .scheduling import HaltStage, HaltWindow
from .settlement import SettlementKind, SettlementRecord

TICK_REQUIRED = ["t_ms", "leg_id", "mid"]
TICK_OPTIONAL = ["bid", "ask", "half_spread", "depth_200bps", "volume"]


# ---------------------------------------------------------------------------
# Ingestion
# ---------------------------------------------------------------------------


def load_leg_series(path: str | Path) -> dict[str, LegSeries]:
    """Parse one tick CSV into per-leg series keyed by leg id."""
    path = Path(path)
    with path.open(newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        if header[: len(TICK_REQUIRED)] != TICK_REQUIRED:
            raise SchemaError(
                f"{path}: header must start with {','.join(TICK_REQUIRED)}", row=1
            )
        extras = header[len(TICK_REQUIRED) :]
        unknown = [c for c in extras if c not in TICK_OPTIONAL]
        if unknown:
            raise SchemaError(f"{path}: unknown column(s) {', '.join(unknown)}", row=1)
        col = {name: i for i, name in enumerate(header)}

        raw: dict[str, dict[str, list]] = {}
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise SchemaError(f"{path}: row {row_no} has {len(row)} fields", row=row_no)
            try:
                t = int(row[col["t_ms"]])
                mid = float(row[col["mid"]])
            except ValueError as exc:
                raise SchemaError(f"{path}: row {row_no}: {exc}", row=row_no) from exc
            if not 0.0 <= mid <= 1.0:
                raise SchemaError(
                    f"{path}: row {row_no}: mid {mid} outside [0, 1]",
                    row=row_no,
                    column="mid",
                )
            leg_id = row[col["leg_id"]]
            bucket = raw.setdefault(
                leg_id, {"t": [], "mid": [], "half_spread": [], "depth": [], "volume": []}
            )
            if bucket["t"] and t <= bucket["t"][-1]:
                raise SchemaError(
                    f"{path}: row {row_no}: timestamp {t} not increasing for leg {leg_id}",
                    row=row_no,
                    column="t_ms",
                )
            bucket["t"].append(t)
            bucket["mid"].append(mid)

            half_spread = None
            if "half_spread" in col and row[col["half_spread"]] != "":
                half_spread = float(row[col["half_spread"]])
            elif "bid" in col and "ask" in col and row[col["bid"]] != "" and row[col["ask"]] != "":
                half_spread = (float(row[col["ask"]]) - float(row[col["bid"]])) / 2.0
            bucket["half_spread"].append(half_spread)
            bucket["depth"].append(
                float(row[col["depth_200bps"]])
                if "depth_200bps" in col and row[col["depth_200bps"]] != ""
                else None
            )
            bucket["volume"].append(
                float(row[col["volume"]])
                if "volume" in col and row[col["volume"]] != ""
                else None
            )

    legs: dict[str, LegSeries] = {}
    for leg_id, b in raw.items():
        points = tuple(ProbabilityPoint(t, v) for t, v in zip(b["t"], b["mid"]))

        def full(vals: list) -> tuple[float, ...] | None:
            return tuple(vals) if all(v is not None for v in vals) else None

        legs[leg_id] = LegSeries(
            leg_id=leg_id,
            points=points,
            half_spread=full(b["half_spread"]),
            depth_200bps=full(b["depth"]),
            volume=full(b["volume"]),
        )
    return legs


def load_resolutions(path: str | Path) -> dict[str, ResolutionRecord]:
    """Parse a resolutions CSV: one record per leg, duplicates rejected."""
    path = Path(path)
    out: dict[str, ResolutionRecord] = {}
    with path.open(newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != ["leg_id", "tau_ms", "outcome"]:
            raise SchemaError(f"{path}: header must be leg_id,tau_ms,outcome", row=1)
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            leg_id, tau_s, outcome_s = row
            if leg_id in out:
                raise SchemaError(f"{path}: duplicate leg {leg_id}", row=row_no)
            try:
                outcome = float(outcome_s)
            except ValueError as exc:
                raise SchemaError(f"{path}: row {row_no}: {exc}", row=row_no) from exc
            if outcome not in (0.0, 1.0):
                raise SchemaError(
                    f"{path}: row {row_no}: outcome {outcome_s} not binary",
                    row=row_no,
                    column="outcome",
                )
            out[leg_id] = ResolutionRecord(tau_ms=int(tau_s), outcome=int(outcome))
    return out


def load_negrisk_groups(path: str | Path) -> list[NegRiskGroup]:
    """Parse a groups CSV of (group_id, leg_id) membership pairs."""
    path = Path(path)
    members: dict[str, list[str]] = {}
    with path.open(newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != ["group_id", "leg_id"]:
            raise SchemaError(f"{path}: header must be group_id,leg_id", row=1)
        for row in reader:
            if not row:
                continue
            group_id, leg_id = row
            members.setdefault(group_id, []).append(leg_id)
    return [NegRiskGroup(gid, tuple(legs)) for gid, legs in members.items()]


def attach_resolutions(
    legs: Mapping[str, LegSeries], resolutions: Mapping[str, ResolutionRecord]
) -> dict[str, LegSeries]:
    """Return legs with their resolution records attached."""
    out = dict(legs)
    for leg_id, record in resolutions.items():
        if leg_id in out:
            leg = out[leg_id]
            out[leg_id] = LegSeries(
                leg_id=leg.leg_id,
                points=leg.points,
                depth_200bps=leg.depth_200bps,
                half_spread=leg.half_spread,
                volume=leg.volume,
                resolution=record,
            )
    return out


def load_data_dir(data_dir: str | Path) -> tuple[dict[str, LegSeries], list[NegRiskGroup]]:
    """Load a data directory: ticks.csv (required), resolutions.csv and
    groups.csv (optional)."""
    data_dir = Path(data_dir)
    ticks = data_dir / "ticks.csv"
    if not ticks.exists():
        raise SchemaError(f"{data_dir}: missing ticks.csv")
    legs = load_leg_series(ticks)
    res_path = data_dir / "resolutions.csv"
    if res_path.exists():
        legs = attach_resolutions(legs, load_resolutions(res_path))
    groups_path = data_dir / "groups.csv"
    groups = load_negrisk_groups(groups_path) if groups_path.exists() else []
    return legs, groups


def write_leg_series(
    legs: Iterable[LegSeries], data_dir: str | Path
) -> None:
    """Write legs as a data directory (ticks.csv + resolutions.csv)."""
    data_dir = Path(data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    legs = list(legs)
    has_micro = any(
        leg.half_spread is not None or leg.depth_200bps is not None or leg.volume is not None
        for leg in legs
    )
    header = list(TICK_REQUIRED) + (["half_spread", "depth_200bps", "volume"] if has_micro else [])
    with (data_dir / "ticks.csv").open("w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for leg in legs:
            for i, p in enumerate(leg.points):
                row = [p.time_ms, leg.leg_id, repr(p.value)]
                if has_micro:
                    row.append(repr(leg.half_spread[i]) if leg.half_spread else "")
                    row.append(repr(leg.depth_200bps[i]) if leg.depth_200bps else "")
                    row.append(repr(leg.volume[i]) if leg.volume else "")
                writer.writerow(row)
    resolved = [leg for leg in legs if leg.resolution is not None]
    if resolved:
        with (data_dir / "resolutions.csv").open("w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["leg_id", "tau_ms", "outcome"])
            for leg in resolved:
                writer.writerow([leg.leg_id, leg.resolution.tau_ms, leg.resolution.outcome])


def write_negrisk_groups(groups: Sequence[NegRiskGroup], data_dir: str | Path) -> None:
    data_dir = Path(data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    with (data_dir / "groups.csv").open("w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["group_id", "leg_id"])
        for g in groups:
            for leg_id in g.members:
                writer.writerow([g.group_id, leg_id])


# ---------------------------------------------------------------------------
# Report serialization
# ---------------------------------------------------------------------------


def report_to_records(report: ReplayReport) -> list[dict[str, Any]]:
    """Flatten a report into ordered per-event-class records."""
    records: list[dict[str, Any]] = [
        {
            "kind": "meta",
            "variant_kind": report.variant_kind,
            "seed": report.seed,
            "grid_ms": report.grid_ms,
            "caveats": report.caveats,
            "incomplete": report.incomplete,
            "error": report.error,
            "bad_debt_total": report.bad_debt_total,
            "venue_cash": report.venue_cash,
            "trader_cash": report.trader_cash,
            "funding_transfer_residuals": report.funding_transfer_residuals,
        }
    ]
    for t, iv, mv in zip(report.index_times, report.index_values, report.mark_values):
        records.append({"kind": "index", "t_ms": t, "index": iv, "mark": mv})
    for t, rate in report.funding_ticks:
        records.append({"kind": "funding", "t_ms": t, "rate": rate})
    for w in report.halt_windows:
        records.append(
            {
                "kind": "halt",
                "start_ms": w.start_ms,
                "end_ms": w.end_ms,
                "triggering_leg": w.triggering_leg,
                "stage": w.stage.value,
            }
        )
    for s, e in report.floor_halts:
        records.append({"kind": "floor_halt", "start_ms": s, "end_ms": e})
    for o in report.orders:
        records.append(
            {
                "kind": "order",
                "t_ms": o.time_ms,
                "trader_id": o.trader_id,
                "accepted": o.accepted,
                "reason": o.reason,
                "position_id": o.position_id,
                "entry_price": o.entry_price,
                "in_halt_window": o.in_halt_window,
            }
        )
    for liq in report.liquidations:
        records.append(
            {
                "kind": "liquidation",
                "t_ms": liq.time_ms,
                "trader_id": liq.trader_id,
                "position_id": liq.position_id,
                "fill_price": liq.fill_price,
                "returned": liq.returned,
                "bad_debt": liq.bad_debt,
            }
        )
    for r in report.roll_events:
        records.append(
            {
                "kind": "roll",
                "t_ms": r.time_ms,
                "from_constituent": r.from_constituent,
                "to_constituent": r.to_constituent,
                "basis_rule": r.basis_rule,
                "index_from": r.index_from,
                "index_to": r.index_to,
                "cash_flows": [[trader, amount] for trader, amount in r.cash_flows],
            }
        )
    for d in report.discontinuities:
        records.append(
            {
                "kind": "discontinuity",
                "t_ms": d.time_ms,
                "pre": d.pre_value,
                "post": d.post_value,
                "cause": d.cause,
            }
        )
    if report.settlement is not None:
        s = report.settlement
        records.append(
            {
                "kind": "settlement",
                "t_ms": s.time_ms,
                "settlement_kind": s.kind.value,
                "value": s.value,
                "triggering_leg": s.triggering_leg,
                "rule_applied": s.rule_applied,
            }
        )
    return records


def report_from_records(records: Sequence[Mapping[str, Any]]) -> ReplayReport:
    meta = next(r for r in records if r["kind"] == "meta")
    report = ReplayReport(
        variant_kind=meta["variant_kind"],
        seed=meta["seed"],
        grid_ms=meta["grid_ms"],
        caveats=list(meta["caveats"]),
        incomplete=meta["incomplete"],
        error=meta["error"],
        bad_debt_total=meta["bad_debt_total"],
        venue_cash=meta["venue_cash"],
        trader_cash=dict(meta["trader_cash"]),
        funding_transfer_residuals=list(meta["funding_transfer_residuals"]),
    )
    for r in records:
        kind = r["kind"]
        if kind == "index":
            report.index_times.append(r["t_ms"])
            report.index_values.append(r["index"])
            report.mark_values.append(r["mark"])
        elif kind == "funding":
            report.funding_ticks.append((r["t_ms"], r["rate"]))
        elif kind == "halt":
            report.halt_windows.append(
                HaltWindow(r["start_ms"], r["end_ms"], r["triggering_leg"], HaltStage(r["stage"]))
            )
        elif kind == "floor_halt":
            report.floor_halts.append((r["start_ms"], r["end_ms"]))
        elif kind == "order":
            report.orders.append(
                OrderOutcome(
                    time_ms=r["t_ms"],
                    trader_id=r["trader_id"],
                    accepted=r["accepted"],
                    reason=r["reason"],
                    position_id=r["position_id"],
                    entry_price=r["entry_price"],
                    in_halt_window=r["in_halt_window"],
                )
            )
        elif kind == "liquidation":
            report.liquidations.append(
                LiquidationEvent(
                    time_ms=r["t_ms"],
                    trader_id=r["trader_id"],
                    position_id=r["position_id"],
                    fill_price=r["fill_price"],
                    returned=r["returned"],
                    bad_debt=r["bad_debt"],
                )
            )
        elif kind == "roll":
            report.roll_events.append(
                RollEvent(
                    time_ms=r["t_ms"],
                    from_constituent=r["from_constituent"],
                    to_constituent=r["to_constituent"],
                    basis_rule=r["basis_rule"],
                    index_from=r["index_from"],
                    index_to=r["index_to"],
                    cash_flows=tuple((t, a) for t, a in r["cash_flows"]),
                )
            )
        elif kind == "discontinuity":
            report.discontinuities.append(
                DiscontinuityRecord(r["t_ms"], r["pre"], r["post"], r["cause"])
            )
        elif kind == "settlement":
            report.settlement = SettlementRecord(
                time_ms=r["t_ms"],
                kind=SettlementKind(r["settlement_kind"]),
                value=r["value"],
                triggering_leg=r["triggering_leg"],
                rule_applied=r["rule_applied"],
            )
    return report


def emit_report_jsonl(report: ReplayReport, path: str | Path) -> Path:
    """One JSON record per line, stable field order, byte-deterministic."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as f:
        for record in report_to_records(report):
            f.write(json.dumps(record, allow_nan=False) + "\n")
    return path


def load_report_jsonl(path: str | Path) -> ReplayReport:
    with Path(path).open() as f:
        records = [json.loads(line) for line in f if line.strip()]
    return report_from_records(records)


_CSV_SERIES = {
    "index": ["t_ms", "index", "mark"],
    "funding": ["t_ms", "rate"],
    "halt": ["start_ms", "end_ms", "triggering_leg", "stage"],
    "floor_halt": ["start_ms", "end_ms"],
    "order": ["t_ms", "trader_id", "accepted", "reason", "position_id", "entry_price", "in_halt_window"],
    "liquidation": ["t_ms", "trader_id", "position_id", "fill_price", "returned", "bad_debt"],
    "roll": ["t_ms", "from_constituent", "to_constituent", "basis_rule", "index_from", "index_to", "cash_flows"],
    "discontinuity": ["t_ms", "pre", "post", "cause"],
    "settlement": ["t_ms", "settlement_kind", "value", "triggering_leg", "rule_applied"],
}


def _csv_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple, dict)):
        return json.dumps(value, allow_nan=False)
    return str(value)


def emit_report_csv_bundle(report: ReplayReport, out_dir: str | Path) -> Path:
    """One CSV per record class plus a summary.json for scalars."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = report_to_records(report)
    meta = records[0]
    (out_dir / "summary.json").write_text(json.dumps(meta, allow_nan=False, indent=2) + "\n")
    for kind, columns in _CSV_SERIES.items():
        rows = [r for r in records if r["kind"] == kind]
        with (out_dir / f"{kind}.csv").open("w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(columns)
            for r in rows:
                writer.writerow([_csv_cell(r[c]) for c in columns])
    return out_dir


_CSV_PARSERS = {
    "t_ms": int,
    "start_ms": int,
    "end_ms": int,
    "position_id": int,
    "from_constituent": int,
    "to_constituent": int,
    "seed": int,
    "index": float,
    "mark": float,
    "rate": float,
    "fill_price": float,
    "returned": float,
    "bad_debt": float,
    "entry_price": float,
    "index_from": float,
    "index_to": float,
    "pre": float,
    "post": float,
    "value": float,
    "accepted": lambda s: s == "true",
    "in_halt_window": lambda s: s == "true",
    "cash_flows": json.loads,
}


def load_report_csv_bundle(out_dir: str | Path) -> ReplayReport:
    out_dir = Path(out_dir)
    meta = json.loads((out_dir / "summary.json").read_text())
    records: list[dict[str, Any]] = [meta]
    for kind, columns in _CSV_SERIES.items():
        path = out_dir / f"{kind}.csv"
        if not path.exists():
            continue
        with path.open(newline="") as f:
            reader = csv.DictReader(f)
            for row in reader:
                rec: dict[str, Any] = {"kind": kind}
                for c in columns:
                    cell = row[c]
                    if cell == "" and c in ("entry_price", "triggering_leg", "error"):
                        rec[c] = None
                    elif c in _CSV_PARSERS:
                        rec[c] = _CSV_PARSERS[c](cell)
                    else:
                        rec[c] = cell
                records.append(rec)
    return report_from_records(records)


# ---------------------------------------------------------------------------
# Batch
# ---------------------------------------------------------------------------


def run_key(spec_path: str | Path, data_path: str | Path, seed: int) -> str:
    """Order-independent identifier for one batch entry."""
    return f"{Path(spec_path).stem}__{Path(data_path).name}__s{seed}"


def run_batch(manifest_path: str | Path, out_dir: str | Path) -> list[dict[str, Any]]:
    """Run every (spec, data, seed) triple in a manifest; per-run outputs are
    keyed by content, and the aggregate summary is sorted by key so the
    result is independent of manifest order."""
    from dataclasses import replace as dc_replace

    from .config import loads_config
    from .replay import replay

    manifest_path = Path(manifest_path)
    out_dir = Path(out_dir)
    entries = json.loads(manifest_path.read_text())
    if not isinstance(entries, list):
        raise SchemaError(f"{manifest_path}: manifest must be a JSON list")
    summaries = []
    for i, entry in enumerate(entries):
        unknown = set(entry) - {"spec", "data", "seed"}
        if unknown:
            raise SchemaError(f"{manifest_path}: entry {i}: unknown keys {sorted(unknown)}")
        spec_path = Path(entry["spec"])
        if not spec_path.is_absolute():
            spec_path = manifest_path.parent / spec_path
        data_path = Path(entry["data"])
        if not data_path.is_absolute():
            data_path = manifest_path.parent / data_path
        seed = int(entry["seed"])
        spec, _, rep = loads_config(spec_path.read_text())
        rep = dc_replace(rep, seed=seed)
        legs, groups = load_data_dir(data_path)
        report = replay(spec, legs, rep, groups)
        key = run_key(spec_path, data_path, seed)
        emit_report_jsonl(report, out_dir / key / "report.jsonl")
        summaries.append(
            {
                "run": key,
                "variant_kind": report.variant_kind,
                "seed": seed,
                "settlement_kind": report.settlement.kind.value if report.settlement else None,
                "settlement_value": report.settlement.value if report.settlement else None,
                "liquidations": len(report.liquidations),
                "bad_debt_total": report.bad_debt_total,
                "incomplete": report.incomplete,
            }
        )
    summaries.sort(key=lambda s: s["run"])
    out_dir.mkdir(parents=True, exist_ok=True)
    with (out_dir / "batch_summary.jsonl").open("w") as f:
        for s in summaries:
            f.write(json.dumps(s, allow_nan=False) + "\n")
    return summaries
