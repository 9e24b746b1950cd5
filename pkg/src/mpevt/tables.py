"""Flat tabular text output (CSV with header, or JSON lines).

Both formats are UTF-8 with LF line endings. Floats are written with
``repr`` so that a rerun with the same inputs produces identical bytes.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

FORMATS = ("csv", "json-lines")


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "nan" if math.isnan(v) else repr(v)
    if isinstance(v, np.integer):
        return str(int(v))
    if v is None:
        return ""
    return str(v)


def _json_value(v):
    if isinstance(v, np.generic):
        v = v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    return v


def render(columns: Sequence[str], rows: Iterable[Sequence], fmt: str = "csv") -> str:
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}; expected one of {FORMATS}")
    buf = io.StringIO()
    if fmt == "csv":
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    else:
        for row in rows:
            rec = {c: _json_value(v) for c, v in zip(columns, row)}
            buf.write(json.dumps(rec, sort_keys=False, allow_nan=False) + "\n")
    return buf.getvalue()


def write_rows(path, columns: Sequence[str], rows: Iterable[Sequence], fmt: str = "csv") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(render(columns, rows, fmt))
    return path


def _parse(s: str):
    if s == "":
        return None
    if s in ("true", "false"):
        return s == "true"
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def read_rows(path, fmt: str | None = None) -> tuple[list[str], list[list]]:
    """Inverse of :func:`write_rows`; returns (columns, rows)."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if fmt is None:
        fmt = "json-lines" if path.suffix in (".jsonl", ".json") else "csv"
    if fmt == "csv":
        reader = list(csv.reader(io.StringIO(text)))
        if not reader:
            return [], []
        return reader[0], [[_parse(c) for c in r] for r in reader[1:]]
    rows, columns = [], []
    for line in text.splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        if not columns:
            columns = list(rec)
        rows.append([rec.get(c) for c in columns])
    return columns, rows


def extension(fmt: str) -> str:
    return ".csv" if fmt == "csv" else ".jsonl"
