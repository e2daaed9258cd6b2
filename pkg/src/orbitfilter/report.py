"""Bit-stable rendering of comparison tables as CSV and markdown.

Formatting is fixed (times to 2 decimals, rates as 2-decimal percentages,
F1 to 2 decimals) so two runs of the same experiment diff cleanly; metric
cells of runs without a classifier render as "/".
"""

from __future__ import annotations

from .models import DISPLAY_NAMES
from .pipeline import ComparisonTable

ROW_LABELS = (
    "Edge Processing Time (s)",
    "Transmission Time (s)",
    "Total Time (s)",
    "Recall",
    "Precision",
    "F1-Score",
    "Images Transmitted",
    "Time Saved vs Bent Pipe",
)

NOT_APPLICABLE = "/"


def _fmt_time(seconds: float) -> str:
    return f"{seconds:.2f}"


def _fmt_pct(ratio: float) -> str:
    return f"{ratio * 100:.2f}%"


def _column_cells(report, delta) -> dict[str, str]:
    m = report.metrics
    return {
        "Edge Processing Time (s)": _fmt_time(report.edge_time_s),
        "Transmission Time (s)": _fmt_time(report.transmission_time_s),
        "Total Time (s)": _fmt_time(report.total_s),
        "Recall": NOT_APPLICABLE if m is None else _fmt_pct(m.recall),
        "Precision": NOT_APPLICABLE if m is None else _fmt_pct(m.precision),
        "F1-Score": NOT_APPLICABLE if m is None else f"{m.f1:.2f}",
        "Images Transmitted": str(report.n_transmitted),
        "Time Saved vs Bent Pipe": (
            NOT_APPLICABLE if delta is None or report.mode == "bent_pipe"
            else f"{delta:.2f}%"),
    }


def _grid(cmp: ComparisonTable) -> tuple[list[str], list[list[str]]]:
    headers = ["Metric"]
    columns = []
    for report, delta in zip(cmp.reports, cmp.time_saved_pct):
        headers.append(DISPLAY_NAMES.get(report.model_name, report.model_name))
        columns.append(_column_cells(report, delta))
    rows = [[label] + [col[label] for col in columns] for label in ROW_LABELS]
    return headers, rows


def render_csv(cmp: ComparisonTable) -> str:
    headers, rows = _grid(cmp)
    lines = [",".join(headers)]
    for row in rows:
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def render_table(cmp: ComparisonTable) -> str:
    """Aligned markdown table, one column per run."""
    headers, rows = _grid(cmp)
    widths = [max(len(headers[i]), *(len(row[i]) for row in rows))
              for i in range(len(headers))]

    def fmt_row(cells):
        return "| " + " | ".join(c.ljust(w) for c, w in zip(cells, widths)) + " |"

    lines = [fmt_row(headers),
             "|" + "|".join("-" * (w + 2) for w in widths) + "|"]
    lines += [fmt_row(row) for row in rows]
    return "\n".join(lines) + "\n"
