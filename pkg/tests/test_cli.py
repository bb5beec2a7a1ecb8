"""CLI surface: subcommands, exit codes, and byte-level determinism."""

from __future__ import annotations

import json
from pathlib import Path

from eventperp.cli import EXIT_IO, EXIT_OK, EXIT_VALIDATION, main


def _write_spec(tmp_path: Path, variant: dict, replay: dict | None = None) -> Path:
    config = {"variant": variant, "replay": replay or {"grid_ms": 60_000}}
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(config))
    return path


def _generate_data(tmp_path: Path, kind="bridge", legs=1, seed=4) -> Path:
    data = tmp_path / "data"
    code = main(
        [
            "generate",
            "--kind", kind,
            "--seed", str(seed),
            "--legs", str(legs),
            "--horizon-ms", str(60 * 60_000),
            "--grid-ms", str(60_000),
            "--out", str(data),
        ]
    )
    assert code == EXIT_OK
    return data


def test_generate_bridge_writes_data_dir(tmp_path):
    data = _generate_data(tmp_path)
    assert (data / "ticks.csv").exists()
    assert (data / "resolutions.csv").exists()


def test_generate_negrisk_writes_groups(tmp_path):
    data = _generate_data(tmp_path, kind="negrisk", legs=3)
    assert (data / "groups.csv").exists()


def test_build_index_subcommand(tmp_path, capsys):
    data = _generate_data(tmp_path)
    spec = _write_spec(
        tmp_path,
        {"kind": "basket", "legs": ["leg0"], "weight_rule": "static", "weights": [1.0]},
    )
    out = tmp_path / "index.jsonl"
    assert main(["build-index", "--spec", str(spec), "--data", str(data), "--out", str(out)]) == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines
    first = json.loads(lines[0])
    assert set(first) == {"t_ms", "value"}


def test_replay_subcommand_deterministic_bytes(tmp_path):
    data = _generate_data(tmp_path)
    spec = _write_spec(
        tmp_path,
        {"kind": "basket", "legs": ["leg0"], "weight_rule": "static", "weights": [1.0]},
        replay={"grid_ms": 60_000, "seed": 11},
    )
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    for out in (out1, out2):
        code = main(
            ["replay", "--spec", str(spec), "--data", str(data), "--seed", "11", "--out", str(out)]
        )
        assert code == EXIT_OK
    assert (out1 / "report.jsonl").read_bytes() == (out2 / "report.jsonl").read_bytes()


def test_replay_csv_bundle_output(tmp_path):
    data = _generate_data(tmp_path)
    spec = _write_spec(
        tmp_path,
        {"kind": "basket", "legs": ["leg0"], "weight_rule": "static", "weights": [1.0]},
    )
    out = tmp_path / "r"
    code = main(
        ["replay", "--spec", str(spec), "--data", str(data), "--out", str(out),
         "--format", "csv-bundle"]
    )
    assert code == EXIT_OK
    assert (out / "csv" / "index.csv").exists()
    assert (out / "csv" / "summary.json").exists()


def test_validation_error_exit_code(tmp_path):
    data = _generate_data(tmp_path)
    spec = _write_spec(
        tmp_path,
        {"kind": "funding-only", "target": "disagreement", "leg_a": "leg0"},
    )
    out = tmp_path / "r"
    code = main(["replay", "--spec", str(spec), "--data", str(data), "--out", str(out)])
    assert code == EXIT_VALIDATION


def test_unknown_config_key_exit_code(tmp_path):
    data = _generate_data(tmp_path)
    spec = tmp_path / "bad.json"
    spec.write_text(json.dumps({"variant": {"kind": "entropy", "leg": "leg0", "oops": 1}}))
    code = main(["replay", "--spec", str(spec), "--data", str(data), "--out", str(tmp_path / "r")])
    assert code == EXIT_VALIDATION


def test_missing_data_dir_exit_code(tmp_path):
    spec = _write_spec(tmp_path, {"kind": "entropy", "leg": "leg0"})
    code = main(
        ["replay", "--spec", str(spec), "--data", str(tmp_path / "nope"), "--out", str(tmp_path / "r")]
    )
    assert code == EXIT_IO


def test_replay_error_exit_code(tmp_path):
    # A correction incompatible with the variant aborts mid-replay; the CLI
    # still writes the partial report and signals the replay failure.
    from eventperp.cli import EXIT_REPLAY

    data = _generate_data(tmp_path)
    config = {
        "variant": {"kind": "variance", "leg": "leg0", "window_ms": 600_000, "tick_ms": 60_000},
        "risk": {"funding": {"correction": "per-leg-min", "interval_ms": 120_000}},
        "replay": {
            "grid_ms": 60_000,
            "mark_overlay": {"kind": "ou", "scale": 0.02},
        },
    }
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps(config))
    out = tmp_path / "r"
    code = main(["replay", "--spec", str(spec), "--data", str(data), "--out", str(out)])
    assert code == EXIT_REPLAY
    report_lines = (out / "report.jsonl").read_text().splitlines()
    meta = json.loads(report_lines[0])
    assert meta["incomplete"] is True
    assert "IncompatibleCorrection" in meta["error"]


def test_taxonomy_subcommand(capsys):
    assert main(["taxonomy", "--table", "inheritance"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "Terminal collapse property" in out
    assert "✓" in out and "×" in out
    assert main(["taxonomy", "--table", "evaluability"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "Mostly evaluable" in out


def test_batch_subcommand(tmp_path):
    data = _generate_data(tmp_path)
    spec = _write_spec(
        tmp_path,
        {"kind": "basket", "legs": ["leg0"], "weight_rule": "static", "weights": [1.0]},
    )
    manifest = tmp_path / "manifest.json"
    manifest.write_text(
        json.dumps([
            {"spec": str(spec), "data": str(data), "seed": 1},
            {"spec": str(spec), "data": str(data), "seed": 2},
        ])
    )
    out = tmp_path / "batch"
    assert main(["batch", "--manifest", str(manifest), "--out", str(out)]) == EXIT_OK
    summary_lines = (out / "batch_summary.jsonl").read_text().splitlines()
    assert len(summary_lines) == 2
