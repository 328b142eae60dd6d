"""CSV and JSON writers shared by the command-line front end."""

from __future__ import annotations

import csv
import json
import math
import os
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

FLOAT_DIGITS = 17


def format_value(v) -> str:
    """Floats at 17 significant digits (round-trip exact); others via str."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.{FLOAT_DIGITS}g}"
    if v is None:
        return ""
    return str(v)


def write_csv(
    path: str | os.PathLike,
    columns: Sequence[str],
    rows: Iterable[Sequence],
    comment: str | None = None,
) -> Path:
    """Write rows; an optional comment line is prefixed with '#'."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([format_value(v) for v in row])
    return path


class CsvStream:
    """Row-at-a-time CSV writer that flushes after every row."""

    def __init__(self, path: str | os.PathLike, columns: Sequence[str], comment: str | None = None):
        self.path = Path(path)
        self._fh = self.path.open("w", newline="")
        if comment:
            self._fh.write(f"# {comment}\n")
        self._w = csv.writer(self._fh, lineterminator="\n")
        self._w.writerow(columns)
        self._fh.flush()

    def write(self, row: Sequence) -> None:
        self._w.writerow([format_value(v) for v in row])
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_csv(path: str | os.PathLike) -> tuple[list[str], list[list[str]]]:
    lines = [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    return rows[0], rows[1:]


def _default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def write_json(path: str | os.PathLike, record) -> Path:
    path = Path(path)
    path.write_text(json.dumps(record, indent=2, sort_keys=True, default=_default) + "\n")
    return path
