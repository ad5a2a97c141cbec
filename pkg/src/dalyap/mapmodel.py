"""Polynomial maps x -> g(x): evaluation, orbits, fixed-point shift, linearization."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .polyalg import Poly, eval_terms, _power_table, terms_from_json, terms_to_json

#: Relative tolerance for accepting a user-supplied fixed point.
FIXED_POINT_TOL = 1e-9


class NotAFixedPoint(ValueError):
    def __init__(self, residual: float, tol: float):
        super().__init__(f"x0 is not a fixed point: |g(x0) - x0| = {residual:.3e} > {tol:.3e}")
        self.residual = residual
        self.tol = tol


class NotOriginFixed(ValueError):
    pass


@dataclass(frozen=True)
class PolyMap:
    """An n-dimensional polynomial map, one :class:`Poly` per output coordinate."""

    dim: int
    components: tuple[Poly, ...]
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        comps = tuple(self.components)
        object.__setattr__(self, "components", comps)
        if len(comps) != self.dim:
            raise ValueError(f"map of dimension {self.dim} has {len(comps)} components")
        for c in comps:
            if c.dim != self.dim:
                raise ValueError(f"component has {c.dim} variables, map dimension is {self.dim}")
        if self.names is not None:
            object.__setattr__(self, "names", tuple(self.names))
            if len(self.names) != self.dim:
                raise ValueError("number of variable names does not match dimension")
        max_exp = [0] * self.dim
        for c in comps:
            for i, e in enumerate(c.max_exponents()):
                max_exp[i] = max(max_exp[i], e)
        object.__setattr__(self, "_max_exp", tuple(max_exp))

    @classmethod
    def from_terms(cls, dim: int, components, names=None) -> PolyMap:
        return cls(dim, tuple(Poly(dim, c) for c in components), names)

    @classmethod
    def zero(cls, dim: int) -> PolyMap:
        return cls(dim, tuple(Poly.zero(dim) for _ in range(dim)))

    @classmethod
    def identity(cls, dim: int) -> PolyMap:
        return cls(dim, tuple(Poly.variable(dim, i) for i in range(dim)))

    @classmethod
    def linear(cls, A) -> PolyMap:
        A = np.asarray(A, dtype=float)
        n = A.shape[0]
        comps = []
        for i in range(n):
            terms = {}
            for j in range(n):
                exp = [0] * n
                exp[j] = 1
                terms[tuple(exp)] = A[i, j]
            comps.append(Poly(n, terms))
        return cls(n, tuple(comps))

    @property
    def degree(self) -> int:
        return max((c.degree for c in self.components), default=-1)

    def is_origin_fixed(self) -> bool:
        zero = (0,) * self.dim
        return all(c.coef(zero) == 0.0 for c in self.components)

    def __call__(self, x):
        return eval_map(self, x)

    def eval_coords(self, coords: list):
        """Evaluate on coordinate lists (floats or equal-shape arrays); returns a list."""
        table = _power_table(coords, self._max_exp)
        return [eval_terms(c.terms, coords, table) for c in self.components]


def _as_point(x, dim: int) -> list[float]:
    coords = [float(v) for v in x]
    if len(coords) != dim:
        raise ValueError(f"point has {len(coords)} coordinates, map dimension is {dim}")
    return coords


def norm(x) -> float:
    s = 0.0
    for v in x:
        s = s + v * v
    return math.sqrt(s)


def eval_map(g: PolyMap, x: Sequence[float]) -> tuple[float, ...]:
    return tuple(g.eval_coords(_as_point(x, g.dim)))


def eval_batch(g: PolyMap, X: np.ndarray) -> np.ndarray:
    """Evaluate at each row of an (N, dim) array."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != g.dim:
        raise ValueError(f"expected an (N, {g.dim}) array, got shape {X.shape}")
    out = g.eval_coords([X[:, i] for i in range(g.dim)])
    return np.column_stack([np.broadcast_to(c, (X.shape[0],)) for c in out]).astype(float)


@dataclass(frozen=True)
class Orbit:
    points: tuple[tuple[float, ...], ...]
    terminated_by: str  # "captured" | "escaped" | "budget_exhausted"

    def __len__(self):
        return len(self.points)


def iterate(g: PolyMap, x, budget: int, escape_radius: float, stop=None) -> Orbit:
    """Orbit x, g(x), ..., g^budget(x), cut short on escape.

    ``stop(k, point)`` may end the orbit early (terminated_by="captured").
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    if not escape_radius > 0:
        raise ValueError("escape_radius must be positive")
    cur = tuple(_as_point(x, g.dim))
    points = [cur]
    if norm(cur) > escape_radius:
        return Orbit(tuple(points), "escaped")
    if stop is not None and stop(0, cur):
        return Orbit(tuple(points), "captured")
    for k in range(1, budget + 1):
        cur = tuple(g.eval_coords(list(cur)))
        points.append(cur)
        if norm(cur) > escape_radius:
            return Orbit(tuple(points), "escaped")
        if stop is not None and stop(k, cur):
            return Orbit(tuple(points), "captured")
    return Orbit(tuple(points), "budget_exhausted")


def shift_fixed_point(g: PolyMap, x0) -> PolyMap:
    """f(y) = g(y + x0) - x0, with constant terms zeroed so f(0) = 0 exactly."""
    x0 = _as_point(x0, g.dim)
    gx = eval_map(g, x0)
    residual = norm([a - b for a, b in zip(gx, x0)])
    tol = FIXED_POINT_TOL * (1.0 + norm(x0))
    if residual > tol:
        raise NotAFixedPoint(residual, tol)
    zero = (0,) * g.dim
    if all(v == 0.0 for v in x0):
        comps = [Poly(g.dim, {e: c for e, c in comp.terms.items() if e != zero}) for comp in g.components]
        return PolyMap(g.dim, tuple(comps), g.names)
    # substitute x_i -> y_i + x0_i
    subs = [Poly.variable(g.dim, i) + x0[i] for i in range(g.dim)]
    comps = []
    for i, comp in enumerate(g.components):
        out = Poly.zero(g.dim)
        powers: dict[tuple[int, int], Poly] = {}
        for exp, coef in comp.terms.items():
            term = Poly.constant(g.dim, coef)
            for j, e in enumerate(exp):
                if e:
                    if (j, e) not in powers:
                        p = Poly.constant(g.dim, 1.0)
                        for _ in range(e):
                            p = p * subs[j]
                        powers[(j, e)] = p
                    term = term * powers[(j, e)]
            out = out + term
        comps.append(Poly(g.dim, {e: c for e, c in out.terms.items() if e != zero}))
    return PolyMap(g.dim, tuple(comps), g.names)


def _require_origin_fixed(f: PolyMap) -> None:
    if not f.is_origin_fixed():
        raise NotOriginFixed("map does not fix the origin (nonzero constant term); shift it first")


def jacobian_at_zero(f: PolyMap) -> np.ndarray:
    """Matrix of degree-1 coefficients, read off exactly."""
    _require_origin_fixed(f)
    n = f.dim
    A = np.zeros((n, n))
    for i, comp in enumerate(f.components):
        for j in range(n):
            exp = [0] * n
            exp[j] = 1
            A[i, j] = comp.coef(exp)
    return A


def nonlinear_part(f: PolyMap) -> PolyMap:
    """h = f - A x: every term of degree at least 2."""
    _require_origin_fixed(f)
    comps = tuple(
        Poly(f.dim, {e: c for e, c in comp.terms.items() if sum(e) >= 2}) for comp in f.components
    )
    return PolyMap(f.dim, comps, f.names)


# -- file format ---------------------------------------------------------------


def map_to_json(g: PolyMap) -> dict:
    names = list(g.names) if g.names else default_names(g.dim)
    return {
        "dim": g.dim,
        "vars": names,
        "components": [terms_to_json(c) for c in g.components],
    }


def map_from_json(doc) -> PolyMap:
    try:
        dim = int(doc["dim"])
        comps = doc["components"]
        names = doc.get("vars")
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed map document: {exc}") from exc
    if len(comps) != dim:
        raise ValueError(f"map document has dim {dim} but {len(comps)} components")
    return PolyMap(dim, tuple(Poly(dim, terms_from_json(dim, c)) for c in comps), names)


def load_map(path) -> PolyMap:
    return map_from_json(json.loads(Path(path).read_text()))


def default_names(dim: int) -> list[str]:
    return ["x", "y", "z"][:dim] if dim <= 3 else [f"x{i}" for i in range(dim)]
