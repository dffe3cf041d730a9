import sys
from pathlib import Path
from typing import Any, Optional, Sequence

from pydantic import BaseModel

from app.utils.datafiles import PathLike


def format_cell(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def render_table(headers: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    """Aligned columns; text left-aligned, numbers right-aligned."""
    cells = [[format_cell(v) for v in row] for row in rows]
    widths = [len(h) for h in headers]
    for row in cells:
        for k, cell in enumerate(row):
            widths[k] = max(widths[k], len(cell))

    def line(values, raw):
        parts = []
        for k, cell in enumerate(values):
            numeric = raw is not None and isinstance(raw[k], (int, float)) and not isinstance(raw[k], bool)
            parts.append(cell.rjust(widths[k]) if numeric else cell.ljust(widths[k]))
        return "  ".join(parts).rstrip()

    out = [line(headers, None), "  ".join("-" * w for w in widths)]
    out.extend(line(row, raw) for row, raw in zip(cells, rows))
    return "\n".join(out) + "\n"


def render_mapping(values: dict[str, Any]) -> str:
    """Two-column key/value table of the scalar fields of a mapping."""
    rows = [(key, value) for key, value in values.items() if not isinstance(value, (dict, list))]
    return render_table(["field", "value"], rows)


def to_json(report: BaseModel) -> str:
    return report.model_dump_json(indent=2) + "\n"


def emit(text: str, out: Optional[PathLike] = None):
    """Write a report to a file, or to stdout when no path is given."""
    if out is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        handle.write(text)
