"""Randomized property suites run by ``dalyap verify``.

Each suite returns a dict with at least ``passed``, ``checked`` and
``violations``; :func:`run_suites` collects them into one report.
"""

from __future__ import annotations

import math

import numpy as np

from . import polyalg
from .estimator import IN, classify_batch
from .lyapunov import (
    LyapunovSeries,
    OrbitConfig,
    orbit_sum_batch,
    partial_orbit_sum,
    residual_polynomial,
    series_eval,
)
from .mapmodel import PolyMap, eval_batch, eval_map, norm
from .spectral import SpectralInfo

ROUNDING_EPS = 8 * np.finfo(float).eps


def sample_ball(rng: np.random.Generator, n_points: int, dim: int, radius: float) -> np.ndarray:
    d = rng.normal(size=(n_points, dim))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    r = radius * rng.uniform(size=(n_points, 1)) ** (1.0 / dim)
    return d * r


def sample_in_da(f, info, rng, n_points, window, cfg, max_rounds: int = 20) -> np.ndarray:
    """Uniform window samples the orbit oracle certifies inside DA(0)."""
    lo = np.array([a for a, _ in window])
    hi = np.array([b for _, b in window])
    keep = []
    for _ in range(max_rounds):
        X = lo + (hi - lo) * rng.uniform(size=(n_points, len(window)))
        cls, _ = classify_batch(f, info, X, cfg)
        keep.append(X[cls == IN])
        if sum(len(k) for k in keep) >= n_points:
            break
    return np.concatenate(keep)[:n_points]


def rounding_allowance(V: LyapunovSeries, x, orbit_value: float) -> float:
    """A priori float64 error bound for comparing an orbit sum with a series value."""
    absolute = polyalg.Poly(V.dim, {e: abs(c) for e, c in V.poly.terms.items()})
    return ROUNDING_EPS * (abs(orbit_value) + polyalg.eval_poly(absolute, [abs(v) for v in x]))


def residual_constant(f, V: LyapunovSeries, radius: float) -> float:
    """Bound C_R with |V(f(x)) - V(x) + |x|^2| <= C_R |x|^(D+1) on the ball of this radius."""
    R = residual_polynomial(V, f)
    D = V.degree
    return sum(abs(c) * radius ** (sum(e) - D - 1) for e, c in R.terms.items() if sum(e) > D)


def truncation_constant(f, info, V: LyapunovSeries, radius: float) -> float:
    """C with |V(x) - V_D(x)| <= C |x|^(D+1) for |x| <= radius inside the capture ball.

    V - V_D telescopes to the residual summed along the orbit, and captured
    orbits obey |f^k(x)| <= c_bar alpha^k |x|.
    """
    p = V.degree + 1
    c_r = residual_constant(f, V, info.c_bar * radius)
    return c_r * info.c_bar ** p / (1.0 - info.alpha ** p)


def cross_construction(f, info, V: LyapunovSeries, rng, n_points=100, C=None, cfg=OrbitConfig()) -> dict:
    """|orbit_sum - series| <= tail_bound + C |x|^(D+1) on the delta/4 ball.

    C defaults to :func:`truncation_constant`. Both sides are float64
    results, so the comparison also allows their a priori evaluation error
    (see :func:`rounding_allowance`).
    """
    radius = info.delta / 4.0
    if C is None:
        C = truncation_constant(f, info, V, radius)
    X = sample_ball(rng, n_points, f.dim, radius)
    b = orbit_sum_batch(f, X, info, cfg)
    worst = 0.0
    bad = 0
    bad_without_rounding = 0
    for k in range(n_points):
        s = series_eval(V, X[k])
        allowed = b.tail_bound[k] + C * norm(X[k]) ** (V.degree + 1)
        gap = abs(b.value[k] - s)
        if not gap <= allowed:
            bad_without_rounding += 1
        allowed += rounding_allowance(V, X[k], b.value[k])
        if not gap <= allowed:
            bad += 1
        if allowed > 0:
            worst = max(worst, gap / allowed)
    return {
        "passed": bad == 0,
        "checked": n_points,
        "violations": bad,
        "C": C,
        "violations_without_rounding_allowance": bad_without_rounding,
        "worst_ratio": worst,
    }


def fit_slope(radii: np.ndarray, values: np.ndarray) -> float:
    ok = values > 0
    return float(np.polyfit(np.log(radii[ok]), np.log(values[ok]), 1)[0])


def decrement_residual_suite(f, V: LyapunovSeries, rng, n_dirs=200, rel_tol=1e-9, slack=0.2) -> dict:
    """V(f(x)) - V(x) + |x|^2 has no terms of degree <= D and decays like |x|^(D+1).

    The residual is expanded as a polynomial so the decay is measured without
    cancellation noise; a numeric spot check ties it back to direct evaluation.
    """
    D = V.degree
    R = residual_polynomial(V, f)
    scale = max([1.0] + [abs(c) for c in V.poly.terms.values()])
    low = {e: c for e, c in R.terms.items() if sum(e) <= D}
    low_bad = [e for e, c in low.items() if abs(c) > rel_tol * scale]
    high = polyalg.Poly(f.dim, {e: c for e, c in R.terms.items() if sum(e) > D})
    dirs = sample_ball(rng, n_dirs, f.dim, 1.0)
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = np.logspace(-3, -1, 9)
    slope = math.inf
    if not high.is_zero():
        rr, vv = [], []
        for r in radii:
            pts = dirs * r
            vals = np.abs(polyalg.eval_poly(high, [pts[:, i] for i in range(f.dim)]))
            rr.append(np.full(n_dirs, r))
            vv.append(np.broadcast_to(vals, (n_dirs,)))
        slope = fit_slope(np.concatenate(rr), np.concatenate(vv))
    spot_bad = 0
    for x in dirs[:20] * 0.1:
        direct = series_eval(V, eval_map(f, x)) - series_eval(V, x) + norm(x) ** 2
        if abs(direct - polyalg.eval_poly(R, x)) > 1e-12 * (1.0 + series_eval(V, x)):
            spot_bad += 1
    passed = not low_bad and slope >= D + 1 - slack and spot_bad == 0
    return {
        "passed": passed,
        "checked": n_dirs,
        "violations": len(low_bad) + spot_bad + (0 if slope >= D + 1 - slack else 1),
        "low_degree_terms": len(low_bad),
        "max_low_degree_coef": max([0.0] + [abs(c) for c in low.values()]),
        "slope": slope if math.isfinite(slope) else None,
    }


def partial_sum_identity(f, X: np.ndarray, n_terms=(1, 2, 4, 8), rel_tol=1e-10) -> dict:
    """V_N(f(x)) - V_N(x) + |x|^2 = |f^(N+1)(x)|^2 for the frozen (N+1)-term sum."""
    bad = 0
    worst = 0.0
    for x in X:
        for n in n_terms:
            lhs = partial_orbit_sum(f, eval_map(f, x), n) - partial_orbit_sum(f, x, n) + norm(x) ** 2
            y = tuple(x)
            for _ in range(n):
                y = eval_map(f, y)
            rhs = norm(y) ** 2
            scale = max(partial_orbit_sum(f, x, n + 1), 1e-300)
            err = abs(lhs - rhs) / scale
            worst = max(worst, err)
            if err > rel_tol:
                bad += 1
    return {"passed": bad == 0, "checked": len(X) * len(n_terms), "violations": bad, "worst_rel": worst}


def tail_bound_suite(f, info, X: np.ndarray, cfg=OrbitConfig(), extra=50) -> dict:
    """Running 50 more steps never adds more than the reported tail bound."""
    b0 = orbit_sum_batch(f, X, info, cfg)
    b1 = orbit_sum_batch(f, X, info, OrbitConfig(cfg.budget + extra, cfg.escape_radius, cfg.n_tail + extra))
    ok = (b0.status == 0) & (b1.status == 0)
    gain = b1.value[ok] - b0.value[ok]
    allowed = b0.tail_bound[ok] + 4 * np.finfo(float).eps * b0.value[ok]
    bad = int((gain > allowed).sum()) + int((~ok).sum())
    return {"passed": bad == 0, "checked": int(len(X)), "violations": bad}


def capture_certificate(f, info, X: np.ndarray, cfg=OrbitConfig(), steps=100) -> dict:
    """After capture the orbit stays in the c_bar*delta ball under the alpha envelope."""
    b = orbit_sum_batch(f, X, info, OrbitConfig(cfg.budget, cfg.escape_radius, 0))
    bad = 0
    checked = 0
    for k in range(len(X)):
        if b.status[k] != 0:
            continue
        checked += 1
        y = np.asarray(X[k])[None, :]
        for _ in range(int(b.capture_index[k])):
            y = eval_batch(f, y)
        n0 = float(np.linalg.norm(y))
        env = info.c_bar * n0
        for _ in range(steps):
            y = eval_batch(f, y)
            env *= info.alpha
            nk = float(np.linalg.norm(y))
            if not (nk < info.delta * info.c_bar and nk <= env * (1 + 1e-12)):
                bad += 1
                break
    return {"passed": bad == 0, "checked": checked, "violations": bad}


def run_suites(
    f: PolyMap,
    info: SpectralInfo,
    V: LyapunovSeries,
    seed: int = 42,
    window=None,
    cfg: OrbitConfig = OrbitConfig(),
    n_samples: int = 1000,
) -> dict:
    rng = np.random.default_rng(seed)
    window = window or [(-1.0, 1.0)] * f.dim
    in_da = sample_in_da(f, info, rng, n_samples, window, cfg)
    suites = {
        "cross_construction": cross_construction(f, info, V, rng, cfg=cfg),
        "decrement_residual": decrement_residual_suite(f, V, rng),
        "partial_sum_identity": partial_sum_identity(f, in_da),
        "tail_bound": tail_bound_suite(f, info, in_da, cfg),
        "capture_certificate": capture_certificate(f, info, in_da, cfg),
    }
    return {
        "seed": seed,
        "degree": V.degree,
        "in_da_samples": int(len(in_da)),
        "passed": all(s["passed"] for s in suites.values()),
        "failed": [k for k, s in suites.items() if not s["passed"]],
        "suites": suites,
    }
