"""Wide CSV format: header row holds the grid points, each further row one curve.

Unobserved cells are written as empty strings; on read both empty cells and
``NaN`` are accepted. Floats are written with 17 significant digits so a
write/read cycle is bit-exact.
"""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path

import numpy as np

from .errors import MalformedCSV
from .fdcore import FunctionalSample, Grid

_MISSING = {"", "nan", "NaN", "NAN"}


def format_float(x: float) -> str:
    return format(float(x), ".17g")


def _parse(cell: str, row: int, col: int) -> float:
    s = cell.strip()
    if s in _MISSING:
        return math.nan
    try:
        v = float(s)
    except ValueError:
        raise MalformedCSV(f"row {row}, column {col}: non-numeric cell {cell!r}") from None
    if not math.isfinite(v):
        raise MalformedCSV(f"row {row}, column {col}: non-finite value {cell!r}")
    return v


def loads(text: str) -> FunctionalSample:
    # blank lines are skipped; a row of empty cells is a curve with nothing observed
    rows = [r for r in csv.reader(io.StringIO(text)) if r]
    if not rows:
        raise MalformedCSV("empty file")
    header = rows[0]
    points = np.array([_parse(c, 0, k) for k, c in enumerate(header)])
    if np.isnan(points).any():
        raise MalformedCSV("header must contain a grid point in every column")
    width = len(header)
    data = np.empty((len(rows) - 1, width))
    for r, row in enumerate(rows[1:], start=1):
        if len(row) != width:
            raise MalformedCSV(f"row {r} has {len(row)} cells, expected {width}")
        data[r - 1] = [_parse(c, r, k) for k, c in enumerate(row)]
    try:
        grid = Grid(points)
    except ValueError as exc:
        raise MalformedCSV(f"invalid grid header: {exc}") from None
    return FunctionalSample(grid, data)


def dumps(sample: FunctionalSample) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([format_float(t) for t in sample.grid.points])
    for vals, mask in zip(sample.values, sample.mask):
        writer.writerow([format_float(v) if m else "" for v, m in zip(vals, mask)])
    return buf.getvalue()


def read_csv(path) -> FunctionalSample:
    return loads(Path(path).read_text(encoding="utf-8"))


def write_csv(sample: FunctionalSample, path) -> None:
    Path(path).write_text(dumps(sample), encoding="utf-8")
