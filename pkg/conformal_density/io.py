"""File input and deterministic output.

This module provides:
- CSV point ingestion with row/column diagnostics
- SHA-256 checksums of input files
- JSON/CSV writers that print every float with 17 significant digits
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import NDArray

from conformal_density.errors import DataFileError

FLOAT_FORMAT = ".17g"


def compute_checksum(file_path: Path | str) -> str:
    """Compute SHA256 checksum for a given file."""
    with open(file_path, "rb") as f:
        return hashlib.sha256(f.read()).hexdigest()


def load_json(filepath: Path | str) -> dict[str, Any]:
    """Load and parse a JSON file."""
    path = Path(filepath)
    with open(path, encoding="utf-8") as f:
        return json.load(f)  # type: ignore[no-any-return]


# ============================================================================
# CSV input
# ============================================================================


def read_points_csv(
    path: Path | str,
    header: bool = False,
    min_rows: int = 1,
    dimension: int | None = None,
) -> NDArray[np.float64]:
    """Read an (n, d) float array from CSV.

    Blank lines are skipped. Errors name the 1-based row and column as they
    appear in the file.
    """
    rows: list[list[float]] = []
    width: int | None = dimension
    with open(path, encoding="utf-8", newline="") as f:
        for row_no, row in enumerate(csv.reader(f), start=1):
            if header and row_no == 1:
                continue
            if not row or all(not cell.strip() for cell in row):
                continue
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise DataFileError(
                    f"{path}: row {row_no} has {len(row)} columns, expected {width}"
                )
            values = []
            for col_no, cell in enumerate(row, start=1):
                try:
                    value = float(cell)
                except ValueError:
                    raise DataFileError(
                        f"{path}: row {row_no}, column {col_no}: {cell!r} is not a number"
                    ) from None
                if not math.isfinite(value):
                    raise DataFileError(
                        f"{path}: row {row_no}, column {col_no}: {cell!r} is not finite"
                    )
                values.append(value)
            rows.append(values)

    if len(rows) < min_rows:
        raise DataFileError(f"{path}: need at least {min_rows} data rows, found {len(rows)}")
    if not rows:
        return np.zeros((0, width or 0), dtype=np.float64)
    return np.asarray(rows, dtype=np.float64)


# ============================================================================
# Deterministic output
# ============================================================================


def format_float(x: float) -> str:
    return format(x, FLOAT_FORMAT)


def _plain(value: Any) -> Any:
    """Unwrap numpy scalars and arrays into builtin types."""
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, tuple):
        return list(value)
    return value


def _encode(value: Any, level: int, compact: bool = False) -> str:
    value = _plain(value)
    pad = "  " * (level + 1)
    end = "  " * level
    if value is None or value is True or value is False or isinstance(value, (int, str)):
        return json.dumps(value, ensure_ascii=False)
    if isinstance(value, float):
        return format_float(value) if math.isfinite(value) else "null"
    if isinstance(value, dict):
        if not value:
            return "{}"
        if compact:
            return "{" + ", ".join(
                f"{json.dumps(str(k), ensure_ascii=False)}: {_encode(v, 0, True)}"
                for k, v in value.items()
            ) + "}"
        items = [
            f"{pad}{json.dumps(str(k), ensure_ascii=False)}: {_encode(v, level + 1)}"
            for k, v in value.items()
        ]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(value, list):
        if not value:
            return "[]"
        if compact:
            return "[" + ", ".join(_encode(v, 0, True) for v in value) + "]"
        return "[\n" + ",\n".join(pad + _encode(v, level + 1) for v in value) + "\n" + end + "]"
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def format_json(data: Any) -> str:
    """JSON with indent=2, 17-digit floats, non-finite floats as null, trailing newline."""
    return _encode(data, 0) + "\n"


def format_json_line(data: Any) -> str:
    """The same encoding as ``format_json`` on a single line, without a newline."""
    return _encode(data, 0, compact=True)


def write_json(path: Path | str, data: Any) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(format_json(data), encoding="utf-8")


def _csv_cell(value: Any) -> str:
    value = _plain(value)
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format_float(value) if math.isfinite(value) else ""
    return str(value)


def format_csv(
    header: Sequence[str], rows: Iterable[Sequence[Any]], comments: Sequence[str] = ()
) -> str:
    """CSV text; each entry of ``comments`` becomes a leading ``# `` line."""
    buf = io.StringIO()
    for line in comments:
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_csv_cell(v) for v in row])
    return buf.getvalue()


def write_csv(path: Path | str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(format_csv(header, rows), encoding="utf-8")
