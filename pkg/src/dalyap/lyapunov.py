"""Two constructions of V with V(f(x)) - V(x) = -|x|^2, V(0) = 0.

* ``orbit_sum`` adds up |f^k(x)|^2 along the orbit and bounds the rest of the
  series once the orbit is inside the capture ball.
* ``series_solve`` builds the Taylor polynomial of V one homogeneous degree at
  a time by solving q(Ax) - q(x) = rhs on the space of degree-m forms.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import polyalg
from .mapmodel import PolyMap, eval_batch, eval_map, jacobian_at_zero, norm
from .polyalg import Poly, compose, monomials, norm_squared_poly
from .spectral import SpectralInfo, spectral_radius, HypothesisError

COND_LIMIT = 1e12

OK, DIVERGED, UNDECIDED = 0, 1, 2


class OrbitDiverged(ArithmeticError):
    def __init__(self, index: int):
        super().__init__(f"orbit diverged (escaped at step {index})")
        self.index = index


class OrbitUndecided(ArithmeticError):
    def __init__(self, steps: int):
        super().__init__(f"orbit neither captured nor escaped within {steps} steps")
        self.steps = steps


@dataclass(frozen=True)
class OrbitConfig:
    budget: int = 10_000
    escape_radius: float = 1e8
    n_tail: int = 10


class Compensated:
    """Neumaier running sum; works elementwise on numpy arrays."""

    def __init__(self, shape=()):
        self.s = np.zeros(shape)
        self.c = np.zeros(shape)

    def add(self, v, where=None):
        s, c = self.s, self.c
        t = s + v
        corr = np.where(np.abs(s) >= np.abs(v), (s - t) + v, (v - t) + s)
        if where is None:
            self.s, self.c = t, c + corr
        else:
            self.s = np.where(where, t, s)
            self.c = np.where(where, c + corr, c)

    @property
    def value(self):
        return self.s + self.c


def _sq_norm_rows(X: np.ndarray) -> np.ndarray:
    s = np.zeros(X.shape[0])
    for i in range(X.shape[1]):
        s = s + X[:, i] * X[:, i]
    return s


@dataclass(frozen=True)
class OrbitSumValue:
    value: float
    n_terms: int
    tail_bound: float
    capture_index: int | None

    def csv_row(self, x) -> list:
        return [*map(float, x), self.value, self.n_terms, self.tail_bound,
                "" if self.capture_index is None else self.capture_index]


@dataclass
class OrbitSumBatch:
    value: np.ndarray
    n_terms: np.ndarray
    tail_bound: np.ndarray
    capture_index: np.ndarray  # -1 when never captured
    status: np.ndarray  # OK / DIVERGED / UNDECIDED
    stop_index: np.ndarray


def orbit_sum_batch(f: PolyMap, X, info: SpectralInfo, cfg: OrbitConfig = OrbitConfig()) -> OrbitSumBatch:
    """Vectorized orbit sums for the rows of X; never raises on divergence."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    N = X.shape[0]
    cap_r, esc = info.capture, cfg.escape_radius
    acc = Compensated(N)
    cur = X.copy()
    sq = _sq_norm_rows(cur)
    nrm = np.sqrt(sq)
    status = np.full(N, OK)
    cap = np.full(N, -1)
    stop = np.zeros(N, dtype=int)
    diverged = nrm > esc
    status[diverged] = DIVERGED
    active = ~diverged
    acc.add(sq, where=active)
    cap[active & (nrm < cap_r)] = 0
    done = active & (cap == 0) & (cfg.n_tail == 0)
    active &= ~done
    last_sq = sq.copy()
    k = 0
    while active.any():
        k += 1
        idx = np.flatnonzero(active)
        if k > cfg.budget:
            status[idx] = UNDECIDED
            stop[idx] = k - 1
            break
        nxt = eval_batch(f, cur[idx])
        cur[idx] = nxt
        s = _sq_norm_rows(nxt)
        n = np.sqrt(s)
        esc_now = n > esc
        status[idx[esc_now]] = DIVERGED
        stop[idx[esc_now]] = k
        live = idx[~esc_now]
        s_live = s[~esc_now]
        mask = np.zeros(N, dtype=bool)
        mask[live] = True
        add = np.zeros(N)
        add[live] = s_live
        acc.add(add, where=mask)
        last_sq[live] = s_live
        newly = live[(cap[live] < 0) & (n[~esc_now] < cap_r)]
        cap[newly] = k
        finished = live[(cap[live] >= 0) & (k - cap[live] >= cfg.n_tail)]
        stop[finished] = k
        active[idx] = False
        active[live] = True
        active[finished] = False
    a2 = info.alpha * info.alpha
    tail = info.c_bar**2 * last_sq * a2 / (1.0 - a2)
    value = acc.value
    ok = status == OK
    return OrbitSumBatch(
        value=np.where(ok, value, np.inf),
        n_terms=stop + 1,
        tail_bound=np.where(ok, tail, np.inf),
        capture_index=cap,
        status=status,
        stop_index=stop,
    )


def orbit_sum(f: PolyMap, x, info: SpectralInfo, cfg: OrbitConfig = OrbitConfig()) -> OrbitSumValue:
    """sum_{k<=K} |f^k(x)|^2 plus a certified bound on the neglected tail.

    K is the capture index plus ``cfg.n_tail``.  Raises OrbitDiverged or
    OrbitUndecided when the orbit escapes or is not captured within budget.
    """
    x = np.asarray([float(v) for v in x])
    if x.size != f.dim:
        raise ValueError(f"point has {x.size} coordinates, map dimension is {f.dim}")
    b = orbit_sum_batch(f, x[None, :], info, cfg)
    st = int(b.status[0])
    if st == DIVERGED:
        raise OrbitDiverged(int(b.stop_index[0]))
    if st == UNDECIDED:
        raise OrbitUndecided(int(b.stop_index[0]))
    return OrbitSumValue(
        value=float(b.value[0]),
        n_terms=int(b.n_terms[0]),
        tail_bound=float(b.tail_bound[0]),
        capture_index=int(b.capture_index[0]),
    )


def partial_orbit_sum(f: PolyMap, x, n_terms: int) -> float:
    """sum_{k=0}^{n_terms-1} |f^k(x)|^2 with a frozen number of terms."""
    acc = Compensated()
    cur = tuple(float(v) for v in x)
    for k in range(n_terms):
        acc.add(sum(v * v for v in cur))
        if k + 1 < n_terms:
            cur = eval_map(f, cur)
    return float(acc.value)


def decrement_residual(f: PolyMap, V: Callable, x) -> float:
    """V(f(x)) - V(x) + |x|^2; zero for the exact Lyapunov function."""
    x = [float(v) for v in x]
    return V(eval_map(f, x)) - V(x) + norm(x) ** 2


# -- power series ---------------------------------------------------------------


@dataclass(frozen=True)
class LyapunovSeries:
    poly: Poly
    degree: int
    residual_per_degree: dict[int, float]
    warnings: dict[int, str] = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.poly.dim

    def __call__(self, x):
        return series_eval(self, x)

    def to_json(self, names=None) -> dict:
        doc = polyalg.poly_to_json(self.poly)
        if names is not None:
            doc["vars"] = list(names)
        doc["degree"] = self.degree
        doc["residual_per_degree"] = {str(m): r for m, r in sorted(self.residual_per_degree.items())}
        if self.warnings:
            doc["warnings"] = {str(m): w for m, w in sorted(self.warnings.items())}
        return doc

    @classmethod
    def from_json(cls, doc) -> LyapunovSeries:
        poly = polyalg.poly_from_json(doc)
        return cls(
            poly=poly,
            degree=int(doc.get("degree", poly.max_degree if poly.max_degree is not None else poly.degree)),
            residual_per_degree={int(k): float(v) for k, v in doc.get("residual_per_degree", {}).items()},
            warnings={int(k): str(v) for k, v in doc.get("warnings", {}).items()},
        )


def linear_pullback_matrix(A: np.ndarray, m: int, basis: list) -> np.ndarray:
    """Matrix of q -> q(Ax) on degree-m forms, columns indexed by ``basis``."""
    n = A.shape[0]
    rows = [Poly(n, {tuple(1 if j == k else 0 for k in range(n)): A[i, j] for j in range(n)}) for i in range(n)]
    pos = {e: i for i, e in enumerate(basis)}
    M = np.zeros((len(basis), len(basis)))
    for col, exp in enumerate(basis):
        q = Poly.constant(n, 1.0)
        for i, e in enumerate(exp):
            for _ in range(e):
                q = polyalg.mul(q, rows[i])
        for e, c in q.terms.items():
            M[pos[e], col] = c
    return M


def _coef_norm(p: Poly) -> float:
    return math.sqrt(sum(c * c for c in p.terms.values()))


def series_solve(f: PolyMap, A=None, degree: int = 8, rng: np.random.Generator | None = None) -> LyapunovSeries:
    """Taylor polynomial of V up to total degree ``degree``.

    For m = 2..degree solves V_m(Ax) - V_m(x) = -[m == 2]|x|^2 - slice_m(V_<m o f).
    The map q -> q(Ax) - q has eigenvalues lambda^beta - 1 with |lambda^beta| <= r^m < 1,
    so every degree is uniquely solvable.  ``rng`` shuffles the monomial basis
    (the answer must not depend on it).
    """
    if degree < 2:
        raise ValueError("degree must be at least 2")
    if not f.is_origin_fixed():
        raise HypothesisError("f(0) = 0 fails: map has a nonzero constant term")
    A = jacobian_at_zero(f) if A is None else np.asarray(A, dtype=float)
    r = spectral_radius(A)
    if not r < 1:
        raise HypothesisError(f"spectral radius {r:g} ≥ 1")
    n = f.dim
    nsq = norm_squared_poly(n)
    V = Poly.zero(n, degree)
    warn: dict[int, str] = {}
    for m in range(2, degree + 1):
        lower = compose(V, f, m)
        check = lower - V + nsq.with_max_degree(m) if m > 2 else None
        if check is not None:
            bad = [e for e, c in check.terms.items() if sum(e) < m and abs(c) > 1e-9 * (1 + _coef_norm(V))]
            if bad:
                raise RuntimeError(f"lower-degree residual did not vanish at degree {m}: {bad}")
        rhs_poly = polyalg.slice(lower, m)
        if m == 2:
            rhs_poly = rhs_poly + nsq
        basis = monomials(n, m)
        if rng is not None:
            basis = [basis[i] for i in rng.permutation(len(basis))]
        L = linear_pullback_matrix(A, m, basis) - np.eye(len(basis))
        rhs = -np.array([rhs_poly.coef(e) for e in basis])
        cond = np.linalg.cond(L)
        if not cond < COND_LIMIT:
            warn[m] = f"degree {m} operator condition estimate {cond:.3e} exceeds {COND_LIMIT:g}"
            warnings.warn(warn[m], RuntimeWarning, stacklevel=2)
        sol = np.linalg.solve(L, rhs)
        V = V + Poly(n, dict(zip(basis, sol.tolist())), degree)
    V = V.with_max_degree(degree)
    full = compose(V, f, degree) - V + nsq.with_max_degree(degree)
    residuals = {m: _coef_norm(polyalg.slice(full, m)) for m in range(2, degree + 1)}
    return LyapunovSeries(poly=V, degree=degree, residual_per_degree=residuals, warnings=warn)


def series_eval(V: LyapunovSeries, x) -> float:
    return polyalg.eval_poly(V.poly, x)


def residual_polynomial(V: LyapunovSeries | Poly, f: PolyMap) -> Poly:
    """The polynomial V(f(x)) - V(x) + |x|^2, without truncation."""
    p = V.poly if isinstance(V, LyapunovSeries) else V
    p = p.with_max_degree(None)
    full = max(p.degree, 0) * max(f.degree, 1)
    return compose(p, f, full) - p + norm_squared_poly(f.dim)
