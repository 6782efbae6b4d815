"""Long-format CSV for matrix series and small tabular writers.

A series file has the header ``t,i,j,value`` with one-based indices and
one line per cell. Floats are written in their shortest round-trip form
(at most 17 significant digits) so a write/read round trip is lossless.
"""

from __future__ import annotations

import csv
import io
import os
import tempfile
from pathlib import Path
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

__all__ = [
    "SeriesFormatError",
    "atomic_write_text",
    "format_float",
    "read_series_csv",
    "rows_to_csv",
    "write_rows_csv",
    "write_series_csv",
]

PathLike = Union[str, os.PathLike]
HEADER = ("t", "i", "j", "value")


class SeriesFormatError(ValueError):
    """Malformed or incomplete series file."""


def format_float(v) -> str:
    return repr(float(v))


def atomic_write_text(path: PathLike, text: str) -> None:
    """Write ``text`` to a temporary file next to ``path`` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_series_csv(path: PathLike, Y) -> None:
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 3:
        raise ValueError("expected a (T, p, q) array")
    T, p, q = Y.shape
    t, i, j = np.meshgrid(np.arange(1, T + 1), np.arange(1, p + 1), np.arange(1, q + 1), indexing="ij")
    lines = [",".join(HEADER)]
    lines.extend(
        f"{a},{b},{c},{format_float(v)}"
        for a, b, c, v in zip(t.ravel(), i.ravel(), j.ravel(), Y.ravel())
    )
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_series_csv(path: PathLike) -> np.ndarray:
    """Parse a long-format series file into a ``(T, p, q)`` array.

    Raises
    ------
    SeriesFormatError
        On a bad header, a malformed line (with its line number), a
        duplicated cell or a missing ``(t, i, j)`` cell.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SeriesFormatError("line 1: empty file") from None
        if tuple(h.strip() for h in header) != HEADER:
            raise SeriesFormatError(f"line 1: expected header {','.join(HEADER)}")
        cells: dict[tuple[int, int, int], float] = {}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not s.strip() for s in row):
                continue
            if len(row) != 4:
                raise SeriesFormatError(f"line {lineno}: expected 4 fields, got {len(row)}")
            try:
                key = (int(row[0]), int(row[1]), int(row[2]))
                value = float(row[3])
            except ValueError:
                raise SeriesFormatError(f"line {lineno}: non-numeric field") from None
            if min(key) < 1:
                raise SeriesFormatError(f"line {lineno}: indices are one-based")
            if not np.isfinite(value):
                raise SeriesFormatError(f"line {lineno}: non-finite value")
            if key in cells:
                raise SeriesFormatError(f"line {lineno}: duplicate cell (t,i,j)={key}")
            cells[key] = value
    if not cells:
        raise SeriesFormatError("no data rows")
    keys = np.array(list(cells), dtype=int)
    T, p, q = keys.max(axis=0)
    if len(cells) != T * p * q:
        for t in range(1, T + 1):
            for i in range(1, p + 1):
                for j in range(1, q + 1):
                    if (t, i, j) not in cells:
                        raise SeriesFormatError(f"missing cell (t,i,j)=({t},{i},{j})")
    Y = np.empty((T, p, q))
    Y[keys[:, 0] - 1, keys[:, 1] - 1, keys[:, 2] - 1] = np.fromiter(cells.values(), float, len(cells))
    return Y


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return format_float(v)
    return str(v)


def rows_to_csv(rows: Iterable[Mapping], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row.get(c, "")) for c in columns])
    return buf.getvalue()


def write_rows_csv(path: PathLike, rows: Sequence[Mapping], columns: Sequence[str] = None) -> None:
    rows = list(rows)
    if columns is None:
        columns = list(dict.fromkeys(k for r in rows for k in r))
    atomic_write_text(path, rows_to_csv(rows, columns))
