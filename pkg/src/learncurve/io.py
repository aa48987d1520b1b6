"""CSV/JSON input and output for case data and results."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, List, Sequence

import numpy as np

from .model import CaseRecord


class ParseError(ValueError):
    """Malformed case file; the message names the row and column."""


def _number(text: str, row: int, col: str) -> float:
    try:
        val = float(text)
    except ValueError:
        raise ParseError(f"row {row}, column {col}: not a number: {text!r}") from None
    if not math.isfinite(val):
        raise ParseError(f"row {row}, column {col}: value must be finite")
    return val


def ingest_cases(path) -> List[CaseRecord]:
    """Read ``case,y,x1,...,xd`` rows and return them sorted by case number.

    Rows are numbered from 1 after the header. The covariate dimension is
    the number of columns after ``y``.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError(f"{path}: empty file, header row missing") from None
        if len(header) < 2 or header[0] != "case" or header[1] != "y":
            raise ParseError(f"{path}: header must start with 'case,y', got {','.join(header)!r}")
        xcols = header[2:]
        seen = {}
        cases = []
        for row_no, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"row {row_no}: expected {len(header)} columns, found {len(row)}")
            idx = _number(row[0], row_no, "case")
            if idx != int(idx):
                raise ParseError(f"row {row_no}, column case: case index must be an integer")
            idx = int(idx)
            if idx in seen:
                raise ParseError(f"row {row_no}, column case: duplicate case index {idx} (first seen in row {seen[idx]})")
            seen[idx] = row_no
            y = _number(row[1], row_no, "y")
            if not y > 0:
                raise ParseError(f"row {row_no}: y must be positive")
            x = tuple(_number(row[2 + j], row_no, name) for j, name in enumerate(xcols))
            cases.append(CaseRecord(idx, y, x))
    if not cases:
        raise ParseError(f"{path}: no data rows")
    cases.sort(key=lambda c: c.index)
    return cases


def write_cases(path, cases: Sequence[CaseRecord]) -> None:
    """Inverse of :func:`ingest_cases`; floats are written in round-trip form."""
    d = len(cases[0].x) if cases else 0
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["case", "y"] + [f"x{j + 1}" for j in range(d)])
        for c in cases:
            w.writerow([c.index, repr(c.y)] + [repr(v) for v in c.x])


def fmt(v) -> str:
    """Ten significant digits; blanks for missing values."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return ""
    return format(v, ".10g")


def write_table(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return float(format(v, ".10g")) if math.isfinite(v) else None
    return obj


def write_json(path, obj) -> None:
    """Deterministic JSON: 10 significant digits, non-finite values as null."""
    text = json.dumps(_clean(obj), indent=2) + "\n"
    Path(path).write_text(text, encoding="utf-8")
