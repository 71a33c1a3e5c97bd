"""
ctxrep Report Service
Renders result matrices and corpus statistics as text or CSV tables
"""

import csv
import io
from typing import List, Optional

from ctxrep.errors import SchemaError
from ctxrep.models import (
    DEFAULT_CONTEXT_SETS,
    AggregationScheme,
    ContextSelection,
    CorpusStats,
    EvalReport,
    ProjectStatsRow,
    ResultMatrix,
    ResultRow,
    Task,
)

CSV_COLUMNS = [
    "task", "encoder", "group", "contexts", "aggregation",
    "precision", "recall", "f1", "accuracy", "improvement", "error",
]

TASK_TITLES = {
    Task.CLONE: "Code Clone Detection",
    Task.CLASSIFY: "Code Classification",
}

_CONTEXT_LABELS = {"vh": "VH", "ch": "CH", "days": "Days"}
_SCHEME_ORDER = list(AggregationScheme)


# ==========================================
# Formatting helpers
# ==========================================

def format_metric(value: Optional[float]) -> str:
    return "" if value is None else f"{value:.3f}"


def format_percent(value: Optional[int]) -> str:
    if value is None:
        return ""
    return f"+{value}%" if value > 0 else f"{value}%"


def parse_percent(text: str) -> Optional[int]:
    text = text.strip()
    if not text:
        return None
    return int(text.rstrip("%"))


def context_group(contexts: str) -> str:
    count = ContextSelection.parse(contexts).context_count
    if count == 0:
        return "baseline"
    return "single" if count == 1 else "multiple"


def context_label(contexts: str) -> str:
    """vh+ch -> VH+CH**, vh -> VH*, none -> Without Context"""
    selection = ContextSelection.parse(contexts)
    if selection.is_baseline:
        return "Without Context"
    label = "+".join(_CONTEXT_LABELS[p] for p in selection.name.split("+"))
    return label + ("*" if selection.context_count == 1 else "**")


def _row_key(row: ResultRow):
    group = {"baseline": 0, "single": 1, "multiple": 2}[context_group(row.contexts)]
    name = ContextSelection.parse(row.contexts).name
    position = DEFAULT_CONTEXT_SETS.index(name) if name in DEFAULT_CONTEXT_SETS else len(DEFAULT_CONTEXT_SETS)
    scheme = _SCHEME_ORDER.index(row.aggregation) if row.aggregation else -1
    return (group, position, name, scheme)


def ordered_rows(matrix: ResultMatrix) -> List[ResultRow]:
    """Per task and encoder: baseline, then single contexts, then multiple"""
    ordered = []
    for task in Task:
        rows = matrix.rows_for(task)
        encoders = list(dict.fromkeys(r.encoder for r in rows))
        for encoder in encoders:
            ordered.extend(sorted((r for r in rows if r.encoder == encoder), key=_row_key))
    return ordered


# ==========================================
# Result tables
# ==========================================

def _csv_record(row: ResultRow) -> List[str]:
    report = row.report
    return [
        row.task.value,
        row.encoder,
        context_group(row.contexts),
        row.contexts,
        row.aggregation.value if row.aggregation else "",
        format_metric(report.precision if report else None),
        format_metric(report.recall if report else None),
        format_metric(report.f1 if report else None),
        format_metric(report.accuracy if report else None),
        format_percent(report.pct_improvement if report else None),
        row.error or "",
    ]


def render_csv(matrix: ResultMatrix) -> str:
    output = io.StringIO()
    writer = csv.writer(output, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in ordered_rows(matrix):
        writer.writerow(_csv_record(row))
    return output.getvalue()


def _text_block(task: Task, encoder: str, rows: List[ResultRow]) -> List[str]:
    metric = "F1" if task == Task.CLONE else "Acc"
    header = ["Contexts", "Aggregation", "P", "R", metric, f"%{metric}"]
    body = []
    for row in rows:
        report = row.report
        aggregation = row.aggregation.label if row.aggregation else "-"
        if report is None:
            body.append([context_label(row.contexts), aggregation, "", "", "", f"failed: {row.error}"])
            continue
        headline = report.f1 if task == Task.CLONE else report.accuracy
        body.append([
            context_label(row.contexts),
            aggregation,
            format_metric(report.precision),
            format_metric(report.recall),
            format_metric(headline),
            format_percent(report.pct_improvement),
        ])

    widths = [max(len(line[i]) for line in [header] + body) for i in range(len(header) - 1)]
    lines = [f"{TASK_TITLES[task]} (encoder: {encoder})"]
    for line in [header] + body:
        cells = [cell.ljust(width) for cell, width in zip(line, widths)] + [line[-1]]
        lines.append("  ".join(cells).rstrip())
    return lines


def render_text(matrix: ResultMatrix) -> str:
    rows = ordered_rows(matrix)
    blocks = []
    for task in Task:
        task_rows = [r for r in rows if r.task == task]
        for encoder in dict.fromkeys(r.encoder for r in task_rows):
            blocks.append("\n".join(_text_block(task, encoder, [r for r in task_rows if r.encoder == encoder])))
    if not blocks:
        return "(empty matrix)\n"
    return "\n\n".join(blocks) + "\n*: Single Context | **: Multiple Contexts\n"


def render_table(matrix: ResultMatrix, fmt: str = "text") -> str:
    """
    Render a result matrix.

    Args:
        matrix: completed matrix
        fmt: "text" or "csv"

    Returns:
        Document with deterministic row order and 3-decimal metrics
    """
    if fmt == "csv":
        return render_csv(matrix)
    if fmt == "text":
        return render_text(matrix)
    raise ValueError(f"unknown format: {fmt}")


def parse_table_csv(text: str) -> ResultMatrix:
    """Read a rendered CSV back into a matrix that renders to the same bytes"""
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != CSV_COLUMNS:
        raise SchemaError(f"unexpected CSV columns: {reader.fieldnames}")
    rows = []
    for line_number, record in enumerate(reader, start=2):
        try:
            report = None
            if record["f1"]:
                report = EvalReport(
                    precision=float(record["precision"]),
                    recall=float(record["recall"]),
                    f1=float(record["f1"]),
                    accuracy=float(record["accuracy"]),
                    pct_improvement=parse_percent(record["improvement"]),
                )
            rows.append(ResultRow(
                task=Task(record["task"]),
                encoder=record["encoder"],
                contexts=record["contexts"],
                aggregation=AggregationScheme(record["aggregation"]) if record["aggregation"] else None,
                report=report,
                error=record["error"] or None,
            ))
        except ValueError as e:
            raise SchemaError(str(e).splitlines()[0], line_number)
    return ResultMatrix(rows=rows)


# ==========================================
# Corpus statistics
# ==========================================

STATS_COLUMNS = [
    "Project",
    "# of methods",
    "Avg # of version/method",
    "Avg # of changed lines/version",
    "Min|Max|Avg # of days",
]


def _stats_cells(row: ProjectStatsRow) -> List[str]:
    changed = row.avg_changed_lines_per_version
    return [
        row.project,
        f"{row.method_count:,}",
        f"{row.avg_versions_per_method:.2f}",
        "-" if changed is None else f"{changed:.2f}",
        f"{row.min_days:,}|{row.max_days:,}|{row.avg_days:,.0f}",
    ]


def render_stats(stats: CorpusStats, fmt: str = "text") -> str:
    """Dataset statistics: one row per project plus the corpus total"""
    rows = [_stats_cells(r) for r in stats.rows] + [_stats_cells(stats.total)]
    if fmt == "csv":
        output = io.StringIO()
        writer = csv.writer(output, lineterminator="\n")
        writer.writerow(STATS_COLUMNS)
        writer.writerows(rows)
        return output.getvalue()
    if fmt != "text":
        raise ValueError(f"unknown format: {fmt}")

    widths = [max(len(line[i]) for line in [STATS_COLUMNS] + rows) for i in range(len(STATS_COLUMNS))]
    lines = []
    for index, line in enumerate([STATS_COLUMNS] + rows):
        if index == len(rows):
            lines.append("-" * (sum(widths) + 2 * (len(widths) - 1)))
        cells = [line[0].ljust(widths[0])] + [cell.rjust(width) for cell, width in zip(line[1:], widths[1:])]
        lines.append("  ".join(cells))
    return "\n".join(lines) + "\n"

