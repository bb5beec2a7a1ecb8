"""Command-line entry points: thin clients over the core package.

Subcommands: build-index, replay, generate, taxonomy, batch, serve.
Exit codes: 0 success, 1 validation error, 2 replay error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .config import loads_config
from .errors import ConfigError, EventPerpError, SchemaError, SpecValidationError
from .fileio import (
    emit_report_csv_bundle,
    emit_report_jsonl,
    load_data_dir,
    run_batch,
    write_leg_series,
    write_negrisk_groups,
)
from .indexing import build_contract_index
from .replay import replay
from .synth import generate_bridge_path, generate_negrisk_group
from .taxonomy import print_taxonomy

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_REPLAY = 2
EXIT_IO = 3


def _load_config(path: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SchemaError(f"cannot read config {path}: {exc}") from exc
    return loads_config(text)


def cmd_build_index(args: argparse.Namespace) -> int:
    spec, _, rep = _load_config(args.spec)
    legs, groups = load_data_dir(args.data)
    contract = build_contract_index(spec, legs, groups, grid_ms=rep.grid_ms)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w") as f:
        for t, v in zip(contract.series.timestamps, contract.series.values):
            f.write(json.dumps({"t_ms": int(t), "value": float(v)}) + "\n")
    print(f"wrote {len(contract.series.values)} index points to {out}")
    return EXIT_OK


def cmd_replay(args: argparse.Namespace) -> int:
    spec, _, rep = _load_config(args.spec)
    if args.risk is not None:
        _, risk_only, _ = _load_config(args.risk)
        rep = replace(rep, risk=risk_only)
    if args.seed is not None:
        rep = replace(rep, seed=args.seed)
    legs, groups = load_data_dir(args.data)
    report = replay(spec, legs, rep, groups)
    out_dir = Path(args.out)
    emit_report_jsonl(report, out_dir / "report.jsonl")
    if args.format == "csv-bundle":
        emit_report_csv_bundle(report, out_dir / "csv")
    settlement = report.settlement.kind.value if report.settlement else "none"
    print(
        f"replay complete: settlement={settlement} liquidations={len(report.liquidations)} "
        f"bad_debt={report.bad_debt_total!r} -> {out_dir}"
    )
    if report.incomplete:
        print(f"replay incomplete: {report.error}", file=sys.stderr)
        return EXIT_REPLAY
    return EXIT_OK


def cmd_generate(args: argparse.Namespace) -> int:
    out_dir = Path(args.out)
    if args.kind == "bridge":
        legs = [
            generate_bridge_path(
                args.seed + i, args.horizon_ms, args.grid_ms, args.p0, leg_id=f"leg{i}"
            )
            for i in range(args.legs)
        ]
        write_leg_series(legs, out_dir)
    else:
        legs, group = generate_negrisk_group(
            args.seed, args.legs, args.horizon_ms, args.grid_ms
        )
        write_leg_series(legs, out_dir)
        write_negrisk_groups([group], out_dir)
    print(f"wrote {args.legs} synthetic leg(s) to {out_dir}")
    return EXIT_OK


def cmd_taxonomy(args: argparse.Namespace) -> int:
    sys.stdout.write(print_taxonomy(args.table))
    return EXIT_OK


def cmd_batch(args: argparse.Namespace) -> int:
    summaries = run_batch(args.manifest, args.out)
    print(f"batch complete: {len(summaries)} run(s) -> {args.out}")
    if any(s["incomplete"] for s in summaries):
        return EXIT_REPLAY
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eventperp",
        description="Deterministic engine and replay simulator for event-linked perpetual variants",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-index", help="construct the variant underlying series only")
    p.add_argument("--spec", required=True, help="run config JSON")
    p.add_argument("--data", required=True, help="data directory (ticks.csv [,resolutions.csv,groups.csv])")
    p.add_argument("--out", required=True, help="output JSONL path")
    p.set_defaults(fn=cmd_build_index)

    p = sub.add_parser("replay", help="full lifecycle replay")
    p.add_argument("--spec", required=True, help="run config JSON")
    p.add_argument("--data", required=True, help="data directory")
    p.add_argument("--risk", default=None, help="optional config JSON overriding the risk section")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--format", choices=["jsonl", "csv-bundle"], default="jsonl")
    p.set_defaults(fn=cmd_replay)

    p = sub.add_parser("generate", help="synthetic data")
    p.add_argument("--kind", choices=["bridge", "negrisk"], required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--legs", type=int, default=1, help="leg count (negrisk needs >= 2)")
    p.add_argument("--horizon-ms", dest="horizon_ms", type=int, default=86_400_000)
    p.add_argument("--grid-ms", dest="grid_ms", type=int, default=60_000)
    p.add_argument("--p0", type=float, default=0.5, help="bridge starting probability")
    p.add_argument("--out", required=True, help="output data directory")
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("taxonomy", help="print the static reference tables")
    p.add_argument("--table", choices=["inheritance", "evaluability"], required=True)
    p.set_defaults(fn=cmd_taxonomy)

    p = sub.add_parser("batch", help="deterministic batch replays from a manifest")
    p.add_argument("--manifest", required=True, help="JSON list of {spec, data, seed}")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(fn=cmd_batch)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except SpecValidationError as exc:
        for err in exc.errors:
            print(f"validation error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SchemaError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except EventPerpError as exc:
        print(f"replay error: {exc}", file=sys.stderr)
        return EXIT_REPLAY


if __name__ == "__main__":
    sys.exit(main())
