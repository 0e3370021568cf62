"""File formats: panel CSV ingestion, flat key=value config files and
JSON result serialisation.

All floating-point output goes through ``repr``, which emits the shortest
decimal string (up to 17 significant digits) that round-trips to the exact
same double, so written files reload bit-identically.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .exceptions import CsvParseError
from .types import Panel, validate_panel


def _is_numeric(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def load_panel_csv(path: str | Path) -> Panel:
    """Read a panel from CSV.

    The first row holds series headers. When the first header is
    non-numeric (a name like ``date`` or ``t``, or empty) the first column
    is treated as a date/index column and dropped. Every remaining cell
    must parse as a decimal float; failures report 1-based file
    coordinates.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise CsvParseError(1, 1, f"{path}: empty file")
    header = rows[0]
    if not header:
        raise CsvParseError(1, 1, f"{path}: empty header row")
    skip = 0 if _is_numeric(header[0]) else 1
    width = len(header)
    data = np.empty((len(rows) - 1, width - skip))
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != width:
            raise CsvParseError(
                r,
                min(len(row), width) + 1,
                f"{path}: row {r} has {len(row)} cells, header has {width}",
            )
        for c, cell in enumerate(row[skip:], start=skip + 1):
            try:
                data[r - 2, c - 1 - skip] = float(cell)
            except ValueError:
                raise CsvParseError(
                    r, c, f"{path}: cannot parse {cell!r} at row {r}, col {c}"
                ) from None
    return validate_panel(data)


def save_matrix_csv(
    path: str | Path,
    matrix: np.ndarray,
    headers: list[str],
    index_name: str = "t",
) -> None:
    """Write a T x N matrix with a leading 1-based integer index column."""
    matrix = np.asarray(matrix, dtype=float)
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([index_name, *headers])
        for t, row in enumerate(matrix, start=1):
            writer.writerow([t, *[repr(float(v)) for v in row]])


def save_panel_csv(path: str | Path, panel: Panel, headers: list[str] | None = None) -> None:
    if headers is None:
        headers = [f"x{i + 1}" for i in range(panel.n_len)]
    save_matrix_csv(path, panel.data, headers)


def parse_config_file(path: str | Path) -> dict[str, str]:
    """Parse a flat ``key = value`` config file.

    Blank lines and ``#`` comments are ignored; keys are lowercased and
    dashes normalised to underscores so they match CLI flag names.
    """
    settings: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        settings[key.strip().lower().replace("-", "_")] = value.strip()
    return settings


def write_json(path: str | Path, payload: dict) -> None:
    """Deterministic JSON dump (stable key order, repr floats, trailing newline)."""
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")
