import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dalyap import polyalg
from dalyap.mapmodel import PolyMap
from dalyap.polyalg import Poly, add, compose, eval_poly, mul, norm_squared_poly, scale, slice, truncate

X = Poly(2, {(1, 0): 1.0})
Y = Poly(2, {(0, 1): 1.0})


def close(p: Poly, q: Poly, tol=1e-9) -> bool:
    keys = set(p.terms) | set(q.terms)
    return all(abs(p.coef(k) - q.coef(k)) <= tol * (1 + abs(q.coef(k))) for k in keys)


small = st.integers(min_value=-5, max_value=5).map(float)
exps = st.tuples(st.integers(0, 3), st.integers(0, 3))
polys = st.dictionaries(exps, small, max_size=6).map(lambda d: Poly(2, d))


def test_difference_of_squares():
    assert mul(add(X, Y), add(X, scale(Y, -1))).terms == {(2, 0): 1.0, (0, 2): -1.0}


def test_mul_by_zero():
    assert mul(add(X, Y), Poly.zero(2)).is_zero()


def test_mul_truncates_above_max_degree():
    x2 = Poly(2, {(2, 0): 1.0})
    y3 = Poly(2, {(0, 3): 1.0})
    assert mul(x2, y3, max_degree=4).is_zero()
    assert mul(x2, y3, max_degree=5).terms == {(2, 3): 1.0}


def test_terms_are_grlex_sorted_and_zero_free():
    p = Poly(2, {(0, 2): 1.0, (1, 0): 2.0, (2, 0): 3.0, (1, 1): 0.0})
    assert list(p.terms) == [(1, 0), (2, 0), (0, 2)]


def test_poly_is_immutable():
    with pytest.raises(AttributeError):
        X.dim = 3


def test_compose_scalar_square():
    a, b = 0.7, -1.3
    f = PolyMap.from_terms(1, [{(1,): a, (2,): b}])
    p = Poly(1, {(2,): 1.0})
    got = compose(p, f, max_degree=3)
    assert got.terms == pytest.approx({(2,): a * a, (3,): 2 * a * b})


def test_compose_identity(ex1):
    p = Poly(2, {(1, 0): 1.5, (2, 1): -2.0, (0, 4): 0.25})
    assert compose(p, PolyMap.identity(2), max_degree=None).terms == p.terms


def test_compose_example_one(ex1):
    y2 = Poly(2, {(0, 2): 1.0})
    assert compose(y2, ex1, max_degree=6).terms == {(0, 6): 1.0}
    assert compose(y2, ex1, max_degree=5).is_zero()


def test_compose_rejects_constant_terms():
    f = PolyMap.from_terms(1, [{(0,): 1.0, (1,): 0.5}])
    with pytest.raises(ValueError):
        compose(Poly(1, {(2,): 1.0}), f, max_degree=4)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        add(X, Poly(3, {(1, 0, 0): 1.0}))


@pytest.mark.parametrize("n, expected", [
    (1, {(2,): 1.0}),
    (2, {(2, 0): 1.0, (0, 2): 1.0}),
    (3, {(2, 0, 0): 1.0, (0, 2, 0): 1.0, (0, 0, 2): 1.0}),
])
def test_norm_squared(n, expected):
    assert norm_squared_poly(n).terms == expected


def test_slice_and_eval():
    p = Poly(2, {(2, 0): 1.0, (0, 2): 2.0, (3, 0): 1.0})
    assert slice(p, 2).terms == {(2, 0): 1.0, (0, 2): 2.0}
    assert slice(p, 5).is_zero()
    assert eval_poly(slice(p, 2), (1.0, 1.0)) == 3.0


def test_json_round_trip():
    p = Poly(2, {(1, 0): 0.1, (2, 3): -7.25, (0, 8): 1e-13}, max_degree=9)
    q = polyalg.poly_from_json(polyalg.poly_to_json(p))
    assert q.terms == p.terms and q.max_degree == 9


@settings(max_examples=60, deadline=None)
@given(polys, polys, polys)
def test_ring_axioms(p, q, r):
    assert close(add(p, q), add(q, p))
    assert close(mul(p, q), mul(q, p))
    assert close(mul(mul(p, q), r), mul(p, mul(q, r)))
    assert close(mul(p, add(q, r)), add(mul(p, q), mul(p, r)))


@settings(max_examples=60, deadline=None)
@given(polys, polys, st.integers(0, 6))
def test_truncation_commutes_with_mul(p, q, d):
    assert close(truncate(mul(p, q), d), mul(truncate(p, d), truncate(q, d), max_degree=d))


@settings(max_examples=60, deadline=None)
@given(polys, polys)
def test_grading(p, q):
    # slice_m(p q) = sum_{i+j=m} slice_i(p) slice_j(q)
    pq = mul(p, q)
    for m in range(pq.degree + 1):
        acc = Poly.zero(2)
        for i in range(m + 1):
            acc = add(acc, mul(slice(p, i), slice(q, m - i)))
        assert close(slice(pq, m), acc)


@settings(max_examples=40, deadline=None)
@given(polys, st.floats(-2, 2), st.floats(-2, 2))
def test_compose_agrees_with_evaluation(p, x, y):
    f = PolyMap.from_terms(2, [{(1, 1): 1.0, (0, 1): 1.0}, {(0, 3): 1.0}])
    fx = f((x, y))
    lhs = eval_poly(compose(p, f, max_degree=None), (x, y))
    rhs = eval_poly(p, fx)
    assert math.isclose(lhs, rhs, rel_tol=1e-9, abs_tol=1e-9)
