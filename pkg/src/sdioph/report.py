"""Reports and their CSV / JSON encodings.

Exact values (ints, Fractions) are written as integers or "p/q" strings.
Floating values are written with 17 significant digits, and a CSV column
holding them carries the tag ":f64" in its header.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath

from . import __version__


@dataclass
class Table:
    columns: list
    rows: list = field(default_factory=list)

    def add(self, *row) -> None:
        if len(row) != len(self.columns):
            raise ValueError(f"row of length {len(row)} for {len(self.columns)} columns")
        self.rows.append(list(row))


@dataclass
class Report:
    kind: str
    config: dict
    summary: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)      # name -> Table
    partial: bool = False
    notes: list = field(default_factory=list)
    version: str = __version__

    def to_record(self) -> dict:
        return {"kind": self.kind, "version": self.version, "config": self.config,
                "partial": self.partial, "notes": list(self.notes),
                "summary": self.summary,
                "tables": {name: {"columns": t.columns, "rows": t.rows}
                           for name, t in self.tables.items()}}


def plain(v):
    """Convert a value to JSON-ready data without losing exactness."""
    if isinstance(v, bool) or v is None or isinstance(v, str):
        return v
    if isinstance(v, int):
        return v
    if isinstance(v, Fraction):
        return v.numerator if v.denominator == 1 else str(v)
    if isinstance(v, float):
        if math.isnan(v) or math.isinf(v):
            return str(v)
        return float(f"{v:.17g}")
    if isinstance(v, mpmath.mpf):
        return plain(float(v))
    if isinstance(v, dict):
        return {str(k): plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [plain(x) for x in v]
    if hasattr(v, "to_record"):
        return plain(v.to_record())
    return str(v)


def _cell(v) -> str:
    if isinstance(v, float):
        return f"{v:.17g}"
    if isinstance(v, (list, tuple)):
        return " ".join(_cell(x) for x in v)
    if v is None:
        return ""
    return str(plain(v))


def _is_float_column(rows, k) -> bool:
    return any(isinstance(r[k], (float, mpmath.mpf)) for r in rows)


def emit(report, fmt: str, table: str | None = None) -> bytes:
    """Encode a report (or any object with to_record) as JSON, or one table as CSV."""
    if fmt == "json":
        rec = report.to_record() if hasattr(report, "to_record") else report
        return (json.dumps(plain(rec), indent=2) + "\n").encode()
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")
    if isinstance(report, Table):
        t = report
    else:
        if table is None:
            if len(report.tables) != 1:
                raise ValueError("name the table to emit")
            table = next(iter(report.tables))
        t = report.tables[table]
    header = [c + (":f64" if _is_float_column(t.rows, k) else "")
              for k, c in enumerate(t.columns)]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in t.rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue().encode()


def minima_table(res) -> Table:
    """MinimaResult -> rows (k, lambda_k, witness)."""
    t = Table(["k", "lambda", "witness"])
    for k, (lam, wv) in enumerate(zip(res.lambdas, res.witnesses), 1):
        t.add(k, lam, list(wv))
    return t


def covering_table(reports) -> Table:
    t = Table(["t", "frequency", "floor", "sigma"])
    for r in reports:
        t.add(*r.row())
    return t
