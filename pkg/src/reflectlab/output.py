"""CSV/JSON writers that stamp every file with a reproducibility header."""

from __future__ import annotations

import csv
import json
import sys

from . import __version__


def header_fields(gamma, **tolerances) -> dict:
    fields = {"reflectlab": __version__, "gamma": gamma}
    fields.update({k: v for k, v in tolerances.items() if v is not None})
    return fields


def header_line(fields: dict) -> str:
    return " ".join(f"{k}={v}" for k, v in fields.items())


def _open(path):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", newline=""), True


def write_csv(path, columns, rows, fields: dict):
    """A ``# key=value ...`` line, the column names, then the rows (floats with 17 digits)."""
    fh, close = _open(path)
    try:
        fh.write(f"# {header_line(fields)}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in row])
    finally:
        if close:
            fh.close()


def write_json(path, payload: dict, fields: dict):
    fh, close = _open(path)
    try:
        json.dump({"header": fields, **payload}, fh, indent=2, sort_keys=False, default=_jsonable)
        fh.write("\n")
    finally:
        if close:
            fh.close()


def _jsonable(obj):
    if hasattr(obj, "tolist"):
        return obj.tolist()
    if hasattr(obj, "item"):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")
