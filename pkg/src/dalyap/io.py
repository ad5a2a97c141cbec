"""Writers for the on-disk artifacts: grid CSV, region/spectral/series JSON, orbit CSV."""

from __future__ import annotations

import csv
import json
import math
from importlib import resources
from pathlib import Path

from .estimator import CLASS_NAMES, GridEstimate
from .mapmodel import PolyMap, load_map, map_from_json, map_to_json

BUNDLED_MAPS = ("ex1", "ex2", "linear_a", "zero")


def fmt(v) -> str:
    """Shortest round-trip text for a float; empty for missing values."""
    if v is None:
        return ""
    v = float(v)
    if not math.isfinite(v):
        return ""
    return repr(v)


def dumps(doc) -> str:
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def write_json(path, doc) -> Path:
    path = Path(path)
    path.write_text(dumps(doc))
    return path


def bundled_map_path(name: str):
    return resources.files("dalyap").joinpath("data", f"{name}.json")


def resolve_map(source: str) -> PolyMap:
    """Load a map file, or a bundled example by name (ex1, ex2, linear_a, zero)."""
    p = Path(source)
    if not p.exists() and source in BUNDLED_MAPS:
        return map_from_text(bundled_map_path(source).read_text())
    return load_map(p)


def map_from_text(text: str) -> PolyMap:
    return map_from_json(json.loads(text))


def save_map(g: PolyMap, path) -> Path:
    return write_json(path, map_to_json(g))


def write_grid_csv(grid: GridEstimate, path) -> Path:
    """One row per cell, C order over cell indices starting at the window minimum."""
    path = Path(path)
    pts = grid.points()
    cls = grid.classes.ravel()
    vals = grid.values.ravel()
    W = grid.W.ravel() if grid.W is not None else None
    header = [f"x{i}" for i in range(grid.dim)] + ["class", "V", "W"]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for k in range(pts.shape[0]):
            row = [fmt(v) for v in pts[k]]
            row.append(CLASS_NAMES[int(cls[k])])
            row.append(fmt(vals[k]))
            row.append(fmt(W[k]) if W is not None else "")
            w.writerow(row)
    return path


def region_summary(grid: GridEstimate, stats: dict, extra: dict | None = None) -> dict:
    doc = {
        "c_star": grid.c_star,
        "window": [list(ax) for ax in grid.window],
        "resolution": list(grid.resolution),
        "soundness": stats.get("soundness"),
        "coverage": stats.get("coverage"),
        "undecided_fraction": stats.get("undecided_fraction"),
        "window_limited": bool(grid.window_limited),
    }
    for k in ("soundness_strict", "mask_cells", "unsound_cells", "band"):
        if k in stats:
            doc[k] = stats[k]
    if extra:
        doc.update(extra)
    return doc


def write_orbit_csv(rows, dim: int, path) -> Path:
    """Rows of (point, OrbitSumValue)."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{i}" for i in range(dim)] + ["value", "n_terms", "tail_bound", "capture_index"])
        for x, v in rows:
            w.writerow([fmt(c) for c in x] + [fmt(v.value), v.n_terms, fmt(v.tail_bound),
                                               "" if v.capture_index is None else v.capture_index])
    return path


def read_grid_csv(path) -> list[dict]:
    with Path(path).open() as fh:
        return list(csv.DictReader(fh))
