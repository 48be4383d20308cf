"""Plain-text serialisation of fields, solutions and threshold reports.

Floats are written with 17 significant digits so that reruns with the same
inputs produce byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .grid import Grid


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")
    return path


def grid_meta(grid: Grid) -> dict:
    return {"shape": grid.shape, "n": grid.n, "h": grid.h, "boundary": grid.boundary}


def write_field(path, grid: Grid, u: np.ndarray) -> list[Path]:
    """Write ``i,j,value`` rows plus the ``.json`` metadata sidecar."""
    grid.check(u)
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "value"])
        for (i, j), val in zip(grid.ij.tolist(), u.tolist()):
            w.writerow([i, j, fmt(val)])
    side = write_json(path.with_suffix(".json"), grid_meta(grid))
    return [path, side]


def read_field(path, grid: Grid | None = None):
    """Read a field CSV.  Returns ``(meta, values)``; ``values`` follows ``grid``
    ordering when a grid is given, else the file order."""
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    with path.open() as fh:
        rows = list(csv.DictReader(fh))
    ij = np.array([[int(r["i"]), int(r["j"])] for r in rows], dtype=np.int64)
    vals = np.array([float(r["value"]) for r in rows])
    if grid is None:
        return meta, vals
    if meta["shape"] != grid.shape or int(meta["n"]) != grid.n:
        raise ValueError("field file belongs to a different grid")
    out = np.zeros(grid.size)
    idx = grid.index[ij[:, 0], ij[:, 1]]
    if np.any(idx < 0) or len(idx) != grid.size:
        raise ValueError("field file does not cover the grid's interior nodes")
    out[idx] = vals
    return meta, out


def write_rows(path, header: list[str], rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) if not isinstance(x, str) else x for x in row])
    return path


def write_c_gamma(path, table) -> Path:
    return write_rows(path, ["gamma", "c_gamma"], table)


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()
