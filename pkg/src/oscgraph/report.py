"""Deterministic CSV/JSON report writers.

Floats are printed with 17 significant digits so values round-trip exactly;
non-finite values are written as ``inf``, ``-inf`` or ``nan`` (JSON strings).
"""

from __future__ import annotations

import io
import json
import math

import numpy as np


def fmt_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    if v is None:
        return ""
    return str(v)


def _csv_cell(v) -> str:
    s = fmt_value(v)
    if any(c in s for c in ',"\n'):
        s = '"' + s.replace('"', '""') + '"'
    return s


def to_csv(columns, rows, meta: dict) -> str:
    """Header line, one line per row, then ``# key = value`` lines carrying ``meta``."""
    buf = io.StringIO()
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(_csv_cell(row.get(c)) for c in columns) + "\n")
    for k, v in _flatten(meta):
        buf.write(f"# {k} = {fmt_value(v)}\n")
    return buf.getvalue()


def _flatten(meta, prefix=""):
    for k, v in meta.items():
        if isinstance(v, dict):
            yield from _flatten(v, f"{prefix}{k}.")
        else:
            yield f"{prefix}{k}", v


def _json(v, indent=0) -> str:
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(v, dict):
        if not v:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_json(x, indent + 1)}" for k, x in v.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(v, (list, tuple)):
        if not v:
            return "[]"
        return "[\n" + ",\n".join(pad + _json(x, indent + 1) for x in v) + "\n" + end + "]"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        s = fmt_value(v)
        return s if math.isfinite(float(v)) else json.dumps(s)
    if v is None:
        return "null"
    return json.dumps(str(v))


def to_json(columns, rows, meta: dict) -> str:
    """``{"meta": ..., "columns": [...], "rows": [{...}, ...]}`` with fixed key order."""
    doc = {"meta": meta, "columns": list(columns), "rows": [{c: row.get(c) for c in columns} for row in rows]}
    return _json(doc) + "\n"


def render(fmt: str, columns, rows, meta: dict) -> str:
    if fmt == "csv":
        return to_csv(columns, rows, meta)
    if fmt == "json":
        return to_json(columns, rows, meta)
    raise ValueError(f"unknown format {fmt!r}")


def read_csv_rows(text: str):
    """Parse a report written by :func:`to_csv` back into (columns, rows of strings, meta)."""
    import csv

    lines = text.splitlines()
    body = [ln for ln in lines if not ln.startswith("# ")]
    meta = {}
    for ln in lines:
        if ln.startswith("# "):
            k, _, v = ln[2:].partition(" = ")
            meta[k] = v
    reader = csv.reader(body)
    columns = next(reader, [])
    return columns, [dict(zip(columns, r)) for r in reader], meta


__all__ = ["fmt_value", "to_csv", "to_json", "render", "read_csv_rows"]
