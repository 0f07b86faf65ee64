"""Render run records as markdown, CSV or JSON report documents."""

from __future__ import annotations

import csv
import io
import json

from .errors import ConfigError
from .pipeline import (
    GENERAL_DEBUG,
    LINKING_METHOD_LABELS,
    OPTIMIZATION,
    RunRecord,
    SCHEMA_LINKING,
    SELF_DEBUG,
    SQL_TO_TEXT,
    TEXT2SQL,
)

MARKDOWN = "markdown"
CSV = "csv"
JSON = "json"
REPORT_FORMATS = (MARKDOWN, CSV, JSON)

STRATA = ("1", "2", "3", ">3")


def _fmt_pct(value) -> str:
    return f"{value:.1f}" if value is not None else "-"


def _fmt_frac(value) -> str:
    return f"{value:.4f}" if value is not None else "-"


def _table_rows(record: RunRecord) -> tuple[list[str], list[list[str]], str]:
    """(header, rows, title) for one record's aggregate table."""
    agg = record.aggregates
    task = agg.get("task") or record.task
    if task == TEXT2SQL:
        header = ["GT Tables", "N", "EX (%)"]
        rows = []
        if agg.get("n"):
            strata = agg.get("strata", {})
            for label in STRATA:
                cell = strata.get(label) or {}
                rows.append([label, str(cell.get("n", 0)), _fmt_pct(cell.get("ex"))])
            rows.append(["Total", str(agg.get("n", 0)), _fmt_pct(agg.get("ex"))])
        title = f"Text-to-SQL ({agg.get('template', '?')})"
        return header, rows, title
    if task in (SELF_DEBUG, GENERAL_DEBUG):
        header = ["Round", "EX (%)", "System Errors", "Result Errors"]
        rows = []
        trajectory = agg.get("ex_trajectory") or []
        systems = agg.get("system_error_counts") or []
        results = agg.get("result_error_counts") or []
        for i, value in enumerate(trajectory):
            rows.append(
                [
                    str(i),
                    _fmt_pct(value),
                    str(systems[i]) if i < len(systems) else "-",
                    str(results[i]) if i < len(results) else "-",
                ]
            )
        label = agg.get("strategy_label", agg.get("strategy", "?"))
        kind = "Self-debug" if task == SELF_DEBUG else "General debug"
        return header, rows, f"{kind} ({label})"
    if task == OPTIMIZATION:
        header = ["Mode", "Variant", "N", "EX (%)", "VES (%)", "C-VES (%)"]
        rows = []
        if agg.get("n"):
            rows.append(
                [
                    agg.get("mode", "?"),
                    agg.get("variant_label") or "-",
                    str(agg.get("n", 0)),
                    _fmt_pct(agg.get("ex")),
                    _fmt_pct(agg.get("ves")),
                    _fmt_pct(agg.get("cves")),
                ]
            )
        return header, rows, "SQL optimization"
    if task == SQL_TO_TEXT:
        header = ["Metric", "Value"]
        rows = []
        if agg.get("n"):
            rows = [
                ["Rouge-1", _fmt_frac(agg.get("rouge1"))],
                ["Rouge-2", _fmt_frac(agg.get("rouge2"))],
                ["Rouge-L", _fmt_frac(agg.get("rougeL"))],
                ["LLM consistency (%)", _fmt_pct(agg.get("consistency_rate"))],
            ]
        return header, rows, "SQL-to-text"
    if task == SCHEMA_LINKING:
        header = [
            "Method",
            "RES (w/o FK)",
            "Subset (w/o FK)",
            "Exact (w/o FK)",
            "RES (w/ FK)",
            "Subset (w/ FK)",
            "Exact (w/ FK)",
        ]
        rows = []
        matrix = agg.get("matrix") or {}
        for method, cells in matrix.items():
            row = [LINKING_METHOD_LABELS.get(method, method)]
            for fk_key in ("no_fk", "fk"):
                cell = cells.get(fk_key) or {}
                row.extend(
                    [
                        _fmt_frac(cell.get("res")),
                        _fmt_frac(cell.get("subset")),
                        _fmt_frac(cell.get("exact")),
                    ]
                )
            rows.append(row)
        return header, rows, "Schema linking"
    raise ConfigError(f"record has unknown task {task!r}")


def _debug_comparison(records: list[RunRecord]) -> tuple[list[str], list[list[str]], str] | None:
    debug = [r for r in records if r.aggregates.get("task") in (SELF_DEBUG, GENERAL_DEBUG)]
    if len(debug) < 2:
        return None
    header = ["Strategy", "EX before (%)", "EX after (%)", "Improvement"]
    rows = []
    for record in debug:
        agg = record.aggregates
        trajectory = agg.get("ex_trajectory") or [None]
        rows.append(
            [
                agg.get("strategy_label", agg.get("strategy", "?")),
                _fmt_pct(trajectory[0]),
                _fmt_pct(agg.get("final_ex")),
                _fmt_pct(agg.get("ex_improvement")),
            ]
        )
    return header, rows, "Debug strategy comparison"


def _markdown_table(header: list[str], rows: list[list[str]]) -> list[str]:
    lines = ["| " + " | ".join(header) + " |"]
    lines.append("| " + " | ".join("---" for _ in header) + " |")
    for row in rows:
        lines.append("| " + " | ".join(row) + " |")
    return lines


def score_and_report(records: "RunRecord | list[RunRecord]", format: str = MARKDOWN) -> str:
    """Render one or more run records as a report document."""
    if isinstance(records, RunRecord):
        records = [records]
    if format not in REPORT_FORMATS:
        raise ConfigError(f"unknown report format {format!r}")
    if format == JSON:
        payload = [
            {"run_id": r.run_id, "config": r.config, "aggregates": r.aggregates} for r in records
        ]
        return json.dumps(payload[0] if len(payload) == 1 else payload, indent=2, sort_keys=True)

    tables = [(_table_rows(r), r.run_id) for r in records]
    comparison = _debug_comparison(records)

    if format == CSV:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        for (header, rows, title), run_id in tables:
            writer.writerow([title, run_id])
            writer.writerow(header)
            writer.writerows(rows)
            writer.writerow([])
        if comparison:
            header, rows, title = comparison
            writer.writerow([title])
            writer.writerow(header)
            writer.writerows(rows)
        return buffer.getvalue().rstrip("\n")

    lines: list[str] = []
    for (header, rows, title), run_id in tables:
        lines.append(f"## {title}")
        lines.append("")
        lines.append(f"Run: `{run_id}`")
        lines.append("")
        lines.extend(_markdown_table(header, rows))
        lines.append("")
    if comparison:
        header, rows, title = comparison
        lines.append(f"## {title}")
        lines.append("")
        lines.extend(_markdown_table(header, rows))
        lines.append("")
    return "\n".join(lines).rstrip("\n")
