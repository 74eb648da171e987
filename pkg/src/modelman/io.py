"""Plain-text outputs: two-column series and JSON documents.

Floats are written with ``repr``, the shortest decimal string that
reads back to the same binary64 value.
"""

import csv
import json
import math
import os

import numpy as np

__all__ = ["emit_series", "read_series", "write_json", "to_jsonable"]


def emit_series(name, points, path):
    """Write ``points`` as CSV with header ``x,y``.

    ``name`` is only used in error messages; an empty series gives a
    header-only file.
    """
    rows = [(float(x), float(y)) for x, y in points]
    for x, y in rows:
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ValueError(f"series {name!r} has a non-finite point ({x}, {y})")
    d = os.path.dirname(os.fspath(path))
    if d:
        os.makedirs(d, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y"])
        for x, y in rows:
            w.writerow([repr(x), repr(y)])
    return path


def read_series(path):
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        next(r)
        return [(float(x), float(y)) for x, y in r]


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def write_json(obj, path=None, fh=None):
    text = json.dumps(to_jsonable(obj), indent=2, sort_keys=False)
    if path is not None:
        d = os.path.dirname(os.fspath(path))
        if d:
            os.makedirs(d, exist_ok=True)
        with open(path, "w") as f:
            f.write(text + "\n")
    if fh is not None:
        fh.write(text + "\n")
    return text
