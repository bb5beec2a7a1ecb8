"""Static reference tables: fixture fidelity and rendering."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from eventperp.taxonomy import (
    EVALUABILITY_TABLE,
    INHERITANCE_TABLE,
    evaluability_row,
    inheritance_cell,
    print_taxonomy,
    taxonomy_data,
)

FIXTURE = json.loads(
    (Path(__file__).parent / "data" / "taxonomy_fixture.json").read_text()
)


def test_inheritance_matches_fixture_cell_for_cell():
    data = taxonomy_data("inheritance")
    expected = FIXTURE["inheritance"]
    assert data["variants"] == expected["variants"]
    assert len(data["rows"]) == len(expected["rows"]) == 12
    for got, want in zip(data["rows"], expected["rows"]):
        assert got["component"] == want["component"]
        assert got["cells"] == want["cells"]
    assert data["legend"] == expected["legend"]


def test_evaluability_matches_fixture_cell_for_cell():
    data = taxonomy_data("evaluability")
    expected = FIXTURE["evaluability"]
    assert len(data["rows"]) == len(expected["rows"]) == 8
    for got, want in zip(data["rows"], expected["rows"]):
        assert got["variant"] == want["variant"]
        assert got["cells"] == want["cells"]
        assert got["net"] == want["net"]
        assert got["tier"] == want["tier"]


def test_specific_cells():
    assert inheritance_cell("Terminal collapse property", "E") == "×"
    assert inheritance_cell("Oracle-mediated resolution", "B") == "✓‡"
    assert inheritance_cell("Jump-aware tiered margin", "G") == "✓†"
    assert inheritance_cell("Index estimator", "H") == "~"
    cells, net, tier = evaluability_row("C")
    assert net == "Mostly evaluable"
    assert tier == "Near-term"
    cells_f, net_f, _ = evaluability_row("F")
    assert net_f == "Not evaluable"
    assert cells_f["counterfactual"] == "×"


def test_rendered_tables_contain_every_cell():
    rendered = print_taxonomy("inheritance")
    for name, cells in INHERITANCE_TABLE:
        assert name in rendered
        for v in cells.values():
            assert v in rendered
    rendered_ev = print_taxonomy("evaluability")
    for label, cells, net, tier in EVALUABILITY_TABLE:
        assert label in rendered_ev
        assert net in rendered_ev
        assert tier in rendered_ev


def test_footnote_markers_present():
    rendered = print_taxonomy("inheritance")
    for marker in ("*", "†", "‡"):
        assert marker in rendered
    rendered_ev = print_taxonomy("evaluability")
    for marker in ("*", "†", "‡", "#"):
        assert marker in rendered_ev


def test_unknown_table_rejected():
    with pytest.raises(ValueError):
        print_taxonomy("nope")
    with pytest.raises(ValueError):
        taxonomy_data("nope")
