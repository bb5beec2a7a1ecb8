"""Static reference tables for the variant family: which framework
components each variant inherits, and how far each variant can be evaluated
by replaying recorded data.

Cell vocabulary: "✓" applies / criterion met, "~" applies with
variant-specific modification / partially met, "×" does not apply / not
met. Footnote markers (*, †, ‡, #) attach per cell; their meanings differ
per table and are listed in the legends.
"""

from __future__ import annotations

VARIANT_LABELS = {
    "A": "Probability-index",
    "B": "Conditional probability",
    "C": "Event spread",
    "D": "Event basket",
    "E": "Volatility / entropy",
    "F": "Liquidity index",
    "G": "Rolling event",
    "H": "Funding-only",
}

INHERITANCE_VARIANTS = ["B", "C", "D", "E", "F", "G", "H"]

INHERITANCE_TABLE: list[tuple[str, dict[str, str]]] = [
    ("Bounded-event process model",
     {"B": "✓*", "C": "✓*", "D": "✓*", "E": "~", "F": "×", "G": "~", "H": "×"}),
    ("Terminal collapse property",
     {"B": "✓", "C": "✓", "D": "✓", "E": "×", "F": "×", "G": "~", "H": "×"}),
    ("Asymmetric depth (boundary > mid)",
     {"B": "✓", "C": "✓", "D": "~", "E": "×", "F": "×", "G": "✓†", "H": "×"}),
    ("Oracle-mediated resolution",
     {"B": "✓‡", "C": "✓", "D": "✓", "E": "~", "F": "×", "G": "✓†", "H": "×"}),
    ("Empirical Condition 1 (near-mid sparsity)",
     {"B": "✓", "C": "✓", "D": "✓", "E": "×", "F": "×", "G": "✓†", "H": "×"}),
    ("Proposition 1 (collateral insufficiency)",
     {"B": "✓", "C": "✓", "D": "✓", "E": "×", "F": "×", "G": "✓†", "H": "×"}),
    ("Proposition 2 (funding instability)",
     {"B": "✓", "C": "✓", "D": "~", "E": "×", "F": "×", "G": "✓†", "H": "~"}),
    ("Index estimator",
     {"B": "~", "C": "~", "D": "~", "E": "~", "F": "~", "G": "~", "H": "~"}),
    ("Jump-aware tiered margin",
     {"B": "✓", "C": "✓", "D": "✓", "E": "×", "F": "×", "G": "✓†", "H": "×"}),
    ("Leverage compression L_max(t)",
     {"B": "✓", "C": "✓", "D": "✓", "E": "×", "F": "×", "G": "✓†", "H": "~"}),
    ("Resolution-zone protocol",
     {"B": "✓", "C": "~", "D": "~", "E": "×", "F": "×", "G": "✓†", "H": "×"}),
    ("Eligibility framework",
     {"B": "✓", "C": "✓", "D": "✓", "E": "~", "F": "~", "G": "✓", "H": "✓"}),
]

INHERITANCE_LEGEND = [
    "✓: applies directly. ~: applies with modification. ×: does not apply.",
    "*: applies per leg.",
    "†: applies per constituent contract within the rolling structure.",
    "‡: with the addition of composition rules for the constituent outcomes.",
]

EVALUABILITY_VARIANTS = ["A", "B", "C", "D", "E", "F", "G", "H"]

EVALUABILITY_COLUMNS = ["underlying", "settlement", "liquidity", "counterfactual"]

EVALUABILITY_TABLE: list[tuple[str, dict[str, str], str, str]] = [
    ("A", {"underlying": "✓", "settlement": "✓", "liquidity": "✓", "counterfactual": "✓"},
     "Fully evaluable", "Deployed"),
    ("B", {"underlying": "~", "settlement": "✓", "liquidity": "~", "counterfactual": "✓"},
     "Partially evaluable", "Near-term"),
    ("C", {"underlying": "✓", "settlement": "✓", "liquidity": "~", "counterfactual": "✓"},
     "Mostly evaluable", "Near-term"),
    ("D", {"underlying": "✓‡", "settlement": "✓", "liquidity": "~", "counterfactual": "✓"},
     "Conditionally evaluable", "Near-term"),
    ("E", {"underlying": "✓", "settlement": "~*", "liquidity": "×", "counterfactual": "~"},
     "Partially evaluable", "Research"),
    ("F#", {"underlying": "✓", "settlement": "×", "liquidity": "×", "counterfactual": "×"},
     "Not evaluable", "Research / speculative"),
    ("G", {"underlying": "✓†", "settlement": "~", "liquidity": "~", "counterfactual": "✓"},
     "Multi-week required", "Near-term, data-dependent"),
    ("H#", {"underlying": "~", "settlement": "×", "liquidity": "×", "counterfactual": "×"},
     "Not evaluable", "Research / speculative"),
]

EVALUABILITY_LEGEND = [
    "✓: criterion met. ~: partially met. ×: not met.",
    "*: settlement observability is trivial for the entropy sub-variant and absent for the variance sub-variant.",
    "†: per-constituent observability holds; the rolling structure itself needs multi-event-cycle data.",
    "‡: conditional on a fixed membership / weights / rebalance specification.",
    "#: deployment would feed back into the underlying markets, so replay-based evaluation is structurally invalid.",
]


def inheritance_cell(component: str, variant: str) -> str:
    for name, row in INHERITANCE_TABLE:
        if name == component:
            return row[variant]
    raise KeyError(component)


def evaluability_row(variant: str) -> tuple[dict[str, str], str, str]:
    for label, cells, net, tier in EVALUABILITY_TABLE:
        if label.rstrip("#") == variant:
            return cells, net, tier
    raise KeyError(variant)


def _render_grid(header: list[str], rows: list[list[str]], legend: list[str]) -> str:
    widths = [max(len(r[i]) for r in [header] + rows) for i in range(len(header))]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    for row in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
    lines.append("")
    lines.extend(legend)
    return "\n".join(lines) + "\n"


def print_taxonomy(table: str) -> str:
    """Render one of the two reference tables as aligned text."""
    if table == "inheritance":
        header = ["component"] + INHERITANCE_VARIANTS
        rows = [
            [name] + [cells[v] for v in INHERITANCE_VARIANTS]
            for name, cells in INHERITANCE_TABLE
        ]
        return _render_grid(header, rows, INHERITANCE_LEGEND)
    if table == "evaluability":
        header = ["variant"] + EVALUABILITY_COLUMNS + ["net", "tier"]
        rows = []
        for label, cells, net, tier in EVALUABILITY_TABLE:
            key = label.rstrip("#")
            pretty = f"{label} {VARIANT_LABELS[key]}"
            rows.append([pretty] + [cells[c] for c in EVALUABILITY_COLUMNS] + [net, tier])
        return _render_grid(header, rows, EVALUABILITY_LEGEND)
    raise ValueError(f"unknown table {table!r} (expected inheritance or evaluability)")


def taxonomy_data(table: str) -> dict:
    """The table as plain data, for the service and the fixture test."""
    if table == "inheritance":
        return {
            "table": "inheritance",
            "variants": INHERITANCE_VARIANTS,
            "rows": [{"component": name, "cells": cells} for name, cells in INHERITANCE_TABLE],
            "legend": INHERITANCE_LEGEND,
        }
    if table == "evaluability":
        return {
            "table": "evaluability",
            "columns": EVALUABILITY_COLUMNS,
            "rows": [
                {"variant": label, "cells": cells, "net": net, "tier": tier}
                for label, cells, net, tier in EVALUABILITY_TABLE
            ],
            "legend": EVALUABILITY_LEGEND,
        }
    raise ValueError(f"unknown table {table!r} (expected inheritance or evaluability)")
