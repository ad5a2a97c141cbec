import math

import numpy as np
import pytest

from conftest import scalar_map
from dalyap import polyalg
from dalyap.lyapunov import (
    LyapunovSeries,
    OrbitConfig,
    OrbitDiverged,
    OrbitUndecided,
    decrement_residual,
    orbit_sum,
    orbit_sum_batch,
    partial_orbit_sum,
    residual_polynomial,
    series_eval,
    series_solve,
)
from dalyap.mapmodel import PolyMap, norm
from dalyap.spectral import HypothesisError, assemble_spectral_info, solve_stein
from oracles import series_oracle

# V of Example 1 through degree 8, derived by hand / sympy and frozen here
EX1_DEGREE8 = {
    (2, 0): 1, (0, 2): 2, (1, 2): 2, (2, 2): 1,
    (0, 6): 2, (0, 7): 2, (1, 7): 2, (0, 8): 1,
}


def coefficients(V):
    return {e: c for e, c in V.poly.terms.items()}


def test_example_one_degree_two(ex1):
    V = series_solve(ex1, degree=2)
    assert coefficients(V) == {(2, 0): 1.0, (0, 2): 2.0}


def test_example_one_degree_eight_frozen(ex1):
    V = series_solve(ex1, degree=8)
    assert coefficients(V) == pytest.approx({e: float(c) for e, c in EX1_DEGREE8.items()}, abs=1e-12)
    assert set(coefficients(V)) == set(EX1_DEGREE8)


@pytest.mark.parametrize("name, degree", [("ex1", 7), ("ex2", 6)])
def test_series_matches_symbolic_oracle(name, degree, request):
    f = request.getfixturevalue(name)
    comps = [{e: c for e, c in comp.terms.items()} for comp in f.components]
    ref = series_oracle(comps, 2, degree)
    V = series_solve(f, degree=degree)
    got = coefficients(V)
    assert set(got) == set(ref)
    for e, c in ref.items():
        assert got[e] == pytest.approx(float(c), rel=1e-12)


def test_scalar_series():
    f = scalar_map(0.5, 1.0)
    V = series_solve(f, degree=3)
    assert V.poly.coef((2,)) == pytest.approx(4 / 3, rel=1e-14)
    assert V.poly.coef((3,)) == pytest.approx(32 / 21, rel=1e-14)
    assert series_eval(V, (0.1,)) == pytest.approx(4 / 3 * 0.01 + 32 / 21 * 0.001, rel=1e-14)


def test_scalar_series_against_oracle():
    from fractions import Fraction

    ref = series_oracle([{(1,): Fraction(1, 2), (2,): Fraction(1)}], 1, 6)
    V = series_solve(scalar_map(0.5, 1.0), degree=6)
    for e, c in ref.items():
        assert V.poly.coef(e) == pytest.approx(float(c), rel=1e-12)


def test_degree_two_matches_stein(rng):
    A = rng.normal(size=(3, 3))
    A *= 0.7 / np.abs(np.linalg.eigvals(A)).max()
    V = series_solve(PolyMap.linear(A), degree=2)
    P = solve_stein(A)
    for i in range(3):
        for j in range(3):
            e = [0, 0, 0]
            e[i] += 1
            e[j] += 1
            want = P[i, j] if i == j else 2 * P[i, j]
            if i <= j:
                assert V.poly.coef(e) == pytest.approx(want, rel=1e-10, abs=1e-12)


def test_stein_solution_properties(rng):
    A = rng.normal(size=(4, 4))
    A *= 0.9 / np.abs(np.linalg.eigvals(A)).max()
    P = solve_stein(A)
    assert np.abs(A.T @ P @ A - P + np.eye(4)).max() <= 1e-10
    assert np.abs(P - P.T).max() <= 1e-12
    X = rng.normal(size=(1000, 4))
    assert np.all(np.einsum("ij,jk,ik->i", X, P, X) > 0)


def test_basis_order_does_not_matter(ex2):
    base = series_solve(ex2, degree=7)
    for seed in range(3):
        V = series_solve(ex2, degree=7, rng=np.random.default_rng(seed))
        assert coefficients(V) == pytest.approx(coefficients(base), rel=1e-12)


def test_zero_map_series(zero2):
    V = series_solve(zero2, degree=4)
    assert coefficients(V) == {(2, 0): 1.0, (0, 2): 1.0}


def test_series_rejects_unstable():
    with pytest.raises(HypothesisError):
        series_solve(scalar_map(1.5), degree=3)


def test_series_eval_basics(ex1):
    V = series_solve(ex1, degree=8)
    assert series_eval(V, (0.0, 0.0)) == 0.0
    assert series_eval(series_solve(ex1, degree=2), (1.0, 1.0)) == 3.0


def test_series_json_round_trip(ex2):
    V = series_solve(ex2, degree=6)
    W = LyapunovSeries.from_json(V.to_json(names=["x", "y"]))
    assert W.poly.terms == V.poly.terms and W.degree == 6


def test_residual_polynomial_starts_above_degree(ex1):
    V = series_solve(ex1, degree=8)
    R = residual_polynomial(V, ex1)
    assert min(sum(e) for e in R.terms) == 9
    assert R.coef((1, 8)) == pytest.approx(2.0)


def test_orbit_sum_geometric():
    f = scalar_map(0.5)
    info = assemble_spectral_info(f)
    v = orbit_sum(f, (1.0,), info, OrbitConfig(n_tail=40))
    assert v.tail_bound < 1e-10
    assert abs(v.value - 4 / 3) <= 1e-10


def test_orbit_sum_at_origin(ex1, ex1_info):
    v = orbit_sum(ex1, (0.0, 0.0), ex1_info)
    assert (v.value, v.capture_index, v.tail_bound) == (0.0, 0, 0.0)


def test_orbit_sum_diverges(ex1, ex1_info):
    with pytest.raises(OrbitDiverged):
        orbit_sum(ex1, (0.0, 1.5), ex1_info)


def test_orbit_sum_undecided(ex1, ex1_info):
    with pytest.raises(OrbitUndecided):
        orbit_sum(ex1, (0.0, 0.999), ex1_info, OrbitConfig(budget=3))


def test_orbit_batch_matches_scalar(ex1, ex1_info, rng):
    X = rng.uniform(-1, 1, size=(40, 2)) * [3.0, 0.95]
    b = orbit_sum_batch(ex1, X, ex1_info)
    for k in range(40):
        assert b.value[k] == orbit_sum(ex1, X[k], ex1_info).value


def test_orbit_sum_tail_bound_is_sound(ex2, ex2_info, rng):
    X = rng.uniform(-0.2, 0.2, size=(200, 2))
    b0 = orbit_sum_batch(ex2, X, ex2_info, OrbitConfig(n_tail=2))
    b1 = orbit_sum_batch(ex2, X, ex2_info, OrbitConfig(n_tail=200))
    ok = (b0.status == 0) & (b1.status == 0)
    assert ok.sum() > 50
    assert np.all(b1.value[ok] - b0.value[ok] <= b0.tail_bound[ok] * (1 + 1e-12) + 1e-300)


def test_orbit_sum_agrees_with_series_near_origin(ex1, ex1_info):
    V = series_solve(ex1, degree=8)
    for x in [(0.01, 0.01), (-0.02, 0.005), (0.0, 0.015)]:
        got = orbit_sum(ex1, x, ex1_info).value
        assert got == pytest.approx(series_eval(V, x), rel=1e-13)


def test_decrement_residual_examples():
    a = 0.6
    f = scalar_map(a)
    assert abs(decrement_residual(f, lambda x: x[0] ** 2 / (1 - a * a), (0.7,))) <= 1e-12
    zero = PolyMap.zero(2)
    assert decrement_residual(zero, lambda x: norm(x) ** 2, (0.3, -0.4)) == pytest.approx(0.0, abs=1e-16)
    half = scalar_map(0.5)
    assert decrement_residual(half, lambda x: partial_orbit_sum(half, x, 1), (1.0,)) == 0.25


def test_partial_sum_identity(ex1, rng):
    for _ in range(50):
        x = rng.uniform(-2, 2, size=2) * [1.0, 0.45]
        for n in (1, 3, 6):
            lhs = partial_orbit_sum(ex1, ex1(x), n) - partial_orbit_sum(ex1, x, n) + norm(x) ** 2
            y = x
            for _ in range(n):
                y = ex1(y)
            assert lhs == pytest.approx(norm(y) ** 2, rel=1e-10, abs=1e-10 * partial_orbit_sum(ex1, x, n + 1))


def test_residual_decays_like_next_degree(ex2, rng):
    V = series_solve(ex2, degree=6)
    R = residual_polynomial(V, ex2)
    d = rng.normal(size=2)
    d /= np.linalg.norm(d)
    r1, r2 = 1e-3, 1e-2
    v1 = abs(polyalg.eval_poly(R, d * r1))
    v2 = abs(polyalg.eval_poly(R, d * r2))
    assert math.log(v2 / v1) / math.log(r2 / r1) >= 6.8
