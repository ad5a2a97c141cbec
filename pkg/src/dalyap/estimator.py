"""Orbit oracle, window rasterization and Lyapunov sublevel estimates of DA(0)."""

from __future__ import annotations

import dataclasses
import heapq
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import ndimage

from .lyapunov import (
    DIVERGED,
    OK,
    LyapunovSeries,
    OrbitConfig,
    OrbitDiverged,
    OrbitUndecided,
    orbit_sum,
    orbit_sum_batch,
)
from .mapmodel import PolyMap, eval_batch, norm
from .polyalg import eval_terms
from .spectral import SpectralInfo

IN, OUT, UNDECIDED = 0, 1, 2
CLASS_NAMES = {IN: "in", OUT: "out", UNDECIDED: "undecided"}

#: Points per work unit; fixed so results never depend on the thread count.
CHUNK = 2048


class EmptySublevel(RuntimeError):
    pass


@dataclass(frozen=True)
class OrbitOutcome:
    cls: str  # "in" | "out" | "undecided"
    capture_index: int | None
    escape_index: int | None
    steps_used: int


def _classes_from_batch(b) -> np.ndarray:
    out = np.full(b.status.shape, UNDECIDED, dtype=np.int8)
    out[b.status == OK] = IN
    out[b.status == DIVERGED] = OUT
    return out


def classify_point(f: PolyMap, info: SpectralInfo, x, cfg: OrbitConfig = OrbitConfig()) -> OrbitOutcome:
    """In when the orbit enters the capture ball, out when it leaves the escape ball."""
    x = np.asarray([float(v) for v in x])
    if x.size != f.dim:
        raise ValueError(f"point has {x.size} coordinates, map dimension is {f.dim}")
    b = orbit_sum_batch(f, x[None, :], info, dataclasses.replace(cfg, n_tail=0))
    c = int(_classes_from_batch(b)[0])
    k = int(b.stop_index[0])
    return OrbitOutcome(
        cls=CLASS_NAMES[c],
        capture_index=k if c == IN else None,
        escape_index=k if c == OUT else None,
        steps_used=k,
    )


def classify_batch(f: PolyMap, info: SpectralInfo, X, cfg: OrbitConfig = OrbitConfig()):
    """(classes, stop indices) for the rows of X."""
    b = orbit_sum_batch(f, X, info, dataclasses.replace(cfg, n_tail=0))
    return _classes_from_batch(b), b.stop_index


@dataclass(frozen=True)
class GridEstimate:
    window: tuple[tuple[float, float], ...]
    resolution: tuple[int, ...]
    classes: np.ndarray
    values: np.ndarray
    method: str
    W: np.ndarray | None = None
    c_star: float | None = None
    mask: np.ndarray | None = None
    window_limited: bool = False
    stats: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return len(self.window)

    def axes(self) -> list[np.ndarray]:
        return [cell_centers(lo, hi, n) for (lo, hi), n in zip(self.window, self.resolution)]

    def points(self) -> np.ndarray:
        """Cell centers, C order over (x0, x1, ...) indices, as an (N, dim) array."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.column_stack([m.ravel() for m in mesh])

    def origin_cell(self) -> tuple[int, ...]:
        idx = []
        for (lo, hi), n in zip(self.window, self.resolution):
            i = int(np.floor((0.0 - lo) / (hi - lo) * n))
            idx.append(min(max(i, 0), n - 1))
        return tuple(idx)


def cell_centers(lo: float, hi: float, n: int) -> np.ndarray:
    h = (hi - lo) / n
    return lo + (np.arange(n) + 0.5) * h


def _check_window(window, resolution, dim):
    if len(window) != dim or len(resolution) != dim:
        raise ValueError(f"window and resolution must have {dim} axes")
    for (lo, hi), n in zip(window, resolution):
        if not lo < hi:
            raise ValueError(f"window axis [{lo}, {hi}] is not well ordered")
        if not lo <= 0.0 <= hi:
            raise ValueError(f"window axis [{lo}, {hi}] excludes the origin")
        if n < 2:
            raise ValueError("resolution must be at least 2 per axis")


def _run_chunks(fn: Callable, X: np.ndarray, threads: int):
    starts = range(0, X.shape[0], CHUNK)
    chunks = [X[s : s + CHUNK] for s in starts]
    if threads <= 1 or len(chunks) == 1:
        return [fn(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, chunks))


def series_values(V: LyapunovSeries, X: np.ndarray) -> np.ndarray:
    out = eval_terms(V.poly.terms, [X[:, i] for i in range(X.shape[1])])
    return np.broadcast_to(out, (X.shape[0],)).astype(float)


def rasterize(
    f: PolyMap,
    info: SpectralInfo,
    window: Sequence[tuple[float, float]],
    resolution: Sequence[int],
    cfg: OrbitConfig = OrbitConfig(),
    V: LyapunovSeries | None = None,
    method: str = "series",
    threads: int = 1,
) -> GridEstimate:
    """Classify every cell center and attach a V value per cell.

    ``method="series"`` evaluates the series ``V`` everywhere; ``method="orbit"``
    stores orbit sums, with +inf on cells that are not certified inside.
    """
    window = tuple((float(lo), float(hi)) for lo, hi in window)
    resolution = tuple(int(n) for n in resolution)
    _check_window(window, resolution, f.dim)
    if method not in ("series", "orbit"):
        raise ValueError(f"unknown method {method!r}")
    if method == "series" and V is None:
        raise ValueError("series method needs a LyapunovSeries")
    grid = GridEstimate(window, resolution, np.empty(0), np.empty(0), method)
    X = grid.points()
    n_tail = cfg.n_tail if method == "orbit" else 0
    run_cfg = dataclasses.replace(cfg, n_tail=n_tail)

    def work(chunk):
        b = orbit_sum_batch(f, chunk, info, run_cfg)
        cls = _classes_from_batch(b)
        if method == "orbit":
            vals = np.where(cls == IN, b.value, np.inf)
        else:
            vals = series_values(V, chunk)
        return cls, vals

    parts = _run_chunks(work, X, threads)
    classes = np.concatenate([p[0] for p in parts]).reshape(resolution)
    values = np.concatenate([p[1] for p in parts]).reshape(resolution)
    return dataclasses.replace(grid, classes=classes, values=values)


@dataclass(frozen=True)
class Sublevel:
    c_star: float
    mask: np.ndarray
    window_limited: bool
    W: np.ndarray
    V: np.ndarray


def bottleneck_levels(values: np.ndarray, start: tuple[int, ...]) -> np.ndarray:
    """For every cell, the least possible max of ``values`` along a 4-connected path from ``start``.

    {cells with level < c} is then exactly the 4-connected component of
    {values < c} containing ``start`` (when values[start] < c).
    """
    shape = values.shape
    level = np.full(shape, np.inf)
    level[start] = values[start]
    done = np.zeros(shape, dtype=bool)
    heap = [(float(values[start]), start)]
    while heap:
        lv, cell = heapq.heappop(heap)
        if done[cell]:
            continue
        done[cell] = True
        for ax in range(len(shape)):
            for step in (-1, 1):
                j = cell[ax] + step
                if 0 <= j < shape[ax]:
                    nb = cell[:ax] + (j,) + cell[ax + 1 :]
                    if not done[nb]:
                        cand = max(lv, float(values[nb]))
                        if cand < level[nb]:
                            level[nb] = cand
                            heapq.heappush(heap, (cand, nb))
    return level


def extract_sublevel(
    grid: GridEstimate,
    V: LyapunovSeries,
    f: PolyMap,
    delta: float,
    gamma: float = 0.5,
    threads: int = 1,
) -> Sublevel:
    """Largest V-sublevel component around the origin free of decrement violations.

    A cell at distance >= delta/2 from the origin violates when
    W = V(f(x)) - V(x) + |x|^2 exceeds gamma |x|^2 or when V(x) <= 0.  The mask
    is the 4-connected component of {V < c_star} holding the origin cell, with
    c_star the lowest level at which that component would reach a violating
    cell (the plain minimum of V over violating cells whenever V grows
    outward).  Without violations, c_star is the lowest level reaching the
    window's outer cells, the mask is taken with <=, and the estimate is
    flagged window-limited.
    """
    X = grid.points()

    def work(chunk):
        vx = series_values(V, chunk)
        vfx = series_values(V, eval_batch(f, chunk))
        sq = np.zeros(chunk.shape[0])
        for i in range(chunk.shape[1]):
            sq = sq + chunk[:, i] * chunk[:, i]
        return vx, vfx - vx + sq, sq

    parts = _run_chunks(work, X, threads)
    vx = np.concatenate([p[0] for p in parts])
    W = np.concatenate([p[1] for p in parts])
    sq = np.concatenate([p[2] for p in parts])
    shape = grid.resolution
    away = np.sqrt(sq) >= delta / 2.0
    violating = (away & ((W > gamma * sq) | (vx <= 0.0))).reshape(shape)
    vx_g = vx.reshape(shape)
    o = grid.origin_cell()
    level = bottleneck_levels(vx_g, o)
    if violating.any():
        c_star = float(level[violating].min())
        mask = level < c_star
        limited = False
    else:
        edge = np.zeros(shape, dtype=bool)
        for ax in range(len(shape)):
            sl = [slice(None)] * len(shape)
            sl[ax] = 0
            edge[tuple(sl)] = True
            sl[ax] = shape[ax] - 1
            edge[tuple(sl)] = True
        c_star = float(level[edge].min())
        mask = level <= c_star
        limited = True
    if not mask[o]:
        raise EmptySublevel(
            f"series degree too low for this window: c_star={c_star:.6g} does not exceed V at the origin cell"
        )
    return Sublevel(c_star=c_star, mask=mask, window_limited=limited, W=W.reshape(shape), V=vx_g)


def attach_sublevel(grid: GridEstimate, sub: Sublevel) -> GridEstimate:
    return dataclasses.replace(
        grid, W=sub.W, c_star=sub.c_star, mask=sub.mask, window_limited=sub.window_limited
    )


def translate_region(grid: GridEstimate, x0) -> GridEstimate:
    """Move the grid by x0: DA(x0) = DA(0) + x0.  Classes and masks are untouched."""
    x0 = [float(v) for v in x0]
    if len(x0) != grid.dim:
        raise ValueError("offset dimension does not match grid")
    window = tuple((lo + d, hi + d) for (lo, hi), d in zip(grid.window, x0))
    return dataclasses.replace(grid, window=window)


def boundary_band(classes: np.ndarray, width: int = 1) -> np.ndarray:
    """Cells within ``width`` cells (Chebyshev) of a change of oracle class."""
    if width <= 0:
        return np.zeros(classes.shape, dtype=bool)
    size = 2 * width + 1
    hi = ndimage.maximum_filter(classes, size=size, mode="nearest")
    lo = ndimage.minimum_filter(classes, size=size, mode="nearest")
    return hi != lo


def compare(classes: np.ndarray, mask: np.ndarray, band: int = 0) -> dict:
    """Soundness and coverage of a mask against oracle classes.

    Undecided cells are dropped from both denominators.  ``band`` additionally
    drops cells near an oracle class change from the soundness count.
    """
    if classes.shape != mask.shape:
        raise ValueError(f"shape mismatch: {classes.shape} vs {mask.shape}")
    decided = classes != UNDECIDED
    excluded = boundary_band(classes, band)
    judged = mask & decided & ~excluded
    n_judged = int(judged.sum())
    n_sound = int((judged & (classes == IN)).sum())
    n_in = int((classes == IN).sum())
    return {
        "soundness": 1.0 if n_judged == 0 else n_sound / n_judged,
        "coverage": 0.0 if n_in == 0 else int((mask & (classes == IN)).sum()) / n_in,
        "undecided_fraction": float((~decided).sum()) / classes.size,
        "mask_cells": int(mask.sum()),
        "unsound_cells": n_judged - n_sound,
        "band": band,
    }


@dataclass(frozen=True)
class ProbeResult:
    samples: list[tuple[float, float]]
    increasing: bool
    growth_factor: float
    normalized_growth: float
    blowup_detected: bool
    truncated: bool
    notice: str
    crossings: dict[float, float]


def boundary_probe(
    f: PolyMap,
    info: SpectralInfo,
    path: Callable[[float], Sequence[float]],
    ts: Sequence[float],
    cfg: OrbitConfig = OrbitConfig(),
    thresholds: Sequence[float] = (10.0, 100.0, 1000.0),
    min_growth: float = 10.0,
) -> ProbeResult:
    """Orbit-sum V along ``path(t)`` for the given parameters.

    Stops at the first point the oracle does not certify inside, reporting a
    notice.  ``blowup_detected`` asks for strictly increasing values whose
    ratio V(x) / |x|^2 grows by at least ``min_growth`` overall, so plain
    quadratic growth (V = |x|^2 for the zero map) does not count.
    """
    samples: list[tuple[float, float]] = []
    ratios: list[float] = []
    truncated = False
    notice = ""
    for t in ts:
        x = path(t)
        try:
            v = orbit_sum(f, x, info, cfg)
        except OrbitDiverged:
            truncated, notice = True, f"probe truncated: point at t={t!r} is outside DA(0)"
            break
        except OrbitUndecided:
            truncated, notice = True, f"probe truncated: point at t={t!r} undecided within budget"
            break
        samples.append((float(t), v.value))
        ratios.append(v.value / norm(x) ** 2 if norm(x) > 0 else 1.0)
    vals = [v for _, v in samples]
    increasing = all(b > a for a, b in zip(vals, vals[1:]))
    growth = vals[-1] / vals[0] if len(vals) >= 2 and vals[0] > 0 else 1.0
    normalized = ratios[-1] / ratios[0] if len(ratios) >= 2 else 1.0
    blowup = len(vals) >= 2 and increasing and normalized >= min_growth
    crossings = {}
    for thr in thresholds:
        for t, v in samples:
            if v >= thr:
                crossings[float(thr)] = t
                break
    if not notice:
        notice = "blow-up detected" if blowup else "no blow-up detected"
    return ProbeResult(samples, increasing, growth, normalized, blowup, truncated, notice, crossings)
