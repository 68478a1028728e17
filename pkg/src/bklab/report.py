"""Deterministic JSON/CSV report emission.

Field order is the insertion order of the payload dict, floats are printed
with 17 significant digits (lossless for float64), and numpy scalars are
converted up front, so re-running a spec with the same seed yields
byte-identical output.  The optional timestamp is off by default and always
excluded by ``canonical_bytes`` for comparisons.
"""

from __future__ import annotations

import math
import time

import numpy as np

SCHEMA_VERSION = "bklab-report/1"


def to_jsonable(obj):
    """Recursively convert numpy containers/scalars into plain Python."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _render_scalar(x) -> str:
    if x is None:
        return "null"
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        if math.isnan(x):
            return '"nan"'
        if math.isinf(x):
            return '"inf"' if x > 0 else '"-inf"'
        return f"{x:.17g}"
    if isinstance(x, str):
        return '"' + x.replace("\\", "\\\\").replace('"', '\\"') + '"'
    raise TypeError(f"cannot serialize {type(x).__name__}")


def _render(obj, indent: int) -> str:
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [
            f'{pad}  "{k}": {_render(v, indent + 1)}' for k, v in obj.items()
        ]
        return "{\n" + ",\n".join(items) + f"\n{pad}}}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        items = [f"{pad}  {_render(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + f"\n{pad}]"
    return _render_scalar(obj)


def render_json(payload: dict) -> bytes:
    return (_render(to_jsonable(payload), 0) + "\n").encode()


def render_csv(header: list[str], rows: list) -> bytes:
    def cell(x) -> str:
        if isinstance(x, float):
            return f"{x:.17g}"
        return str(x)

    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(cell(c) for c in row))
    return ("\n".join(lines) + "\n").encode()


def emit(payload: dict, fmt: str = "json", *, stamp: bool = False) -> bytes:
    """Serialize a report payload; csv payloads carry their own header/rows."""
    payload = dict(payload)
    if stamp:
        payload["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
    if fmt == "json":
        return render_json(payload)
    if fmt == "csv":
        header = payload.get("csv_header")
        rows = payload.get("csv_rows")
        if header is None or rows is None:
            raise ValueError("payload has no CSV projection")
        return render_csv(list(header), to_jsonable(rows))
    raise ValueError(f"unknown format {fmt!r}")


def canonical_bytes(payload: dict, fmt: str = "json") -> bytes:
    """Serialization with the timestamp removed: the comparison form."""
    payload = {k: v for k, v in payload.items() if k != "timestamp"}
    return emit(payload, fmt, stamp=False)


def bound_report_payload(report, *, stamp: bool = False) -> dict:
    """Stable field order for a bound audit: name, lhs, lhs_se, rhs, rhs_se,
    slack, holds_within, seed."""
    return {
        "name": report.name,
        "lhs": report.lhs,
        "lhs_se": report.lhs_se,
        "rhs": report.rhs,
        "rhs_se": report.rhs_se,
        "slack": report.slack,
        "holds_within": report.holds_within,
        "seed": report.seed,
        "schema": SCHEMA_VERSION,
        "details": to_jsonable(report.details),
    }
