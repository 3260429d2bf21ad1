import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from erps.errors import PolynomialBlowupError
from erps.polynomial import Monomial, Polynomial

MODES = 2
SYMS = sp.symbols("q0 q1 p0 p1")


def to_sympy(poly):
    expr = 0
    for key, c in poly.terms.items():
        term = sp.Float(c, 30)
        for s, e in zip(SYMS, key):
            term *= s ** e
        expr += term
    return sp.expand(expr)


def same(poly, expr, tol=1e-10):
    diff = sp.Poly(sp.expand(to_sympy(poly) - expr), *SYMS)
    return all(abs(float(c)) < tol for c in diff.coeffs()) if diff.coeffs() else True


coeff = st.floats(-3, 3, allow_nan=False).filter(lambda c: abs(c) > 1e-3)
key = st.tuples(*[st.integers(0, 2)] * (2 * MODES))
polys = st.dictionaries(key, coeff, min_size=1, max_size=5).map(lambda d: Polynomial(MODES, d))
small = st.dictionaries(st.tuples(*[st.integers(0, 1)] * (2 * MODES)), coeff, min_size=1,
                        max_size=3).map(lambda d: Polynomial(MODES, d))


@settings(max_examples=60, deadline=None)
@given(polys, polys)
def test_arithmetic_matches_sympy(a, b):
    assert same(a + b, to_sympy(a) + to_sympy(b))
    assert same(a - b, to_sympy(a) - to_sympy(b))
    assert same(a * b, to_sympy(a) * to_sympy(b))


@settings(max_examples=30, deadline=None)
@given(polys, st.lists(small, min_size=4, max_size=4))
def test_substitution_matches_sympy(a, images):
    expected = to_sympy(a).subs({s: to_sympy(i) for s, i in zip(SYMS, images)}, simultaneous=True)
    assert same(a.substitute(images), sp.expand(expected), tol=1e-8)


@settings(max_examples=40, deadline=None)
@given(polys, st.integers(0, 3))
def test_derivative_matches_sympy(a, var):
    assert same(a.derivative(var), sp.diff(to_sympy(a), SYMS[var]))


@settings(max_examples=40, deadline=None)
@given(polys)
def test_evaluate_matches_sympy(a):
    q, p = np.array([0.3, -1.2]), np.array([0.7, 2.1])
    val = float(to_sympy(a).subs(dict(zip(SYMS, [*q, *p]))))
    assert a.evaluate(q, p) == pytest.approx(val, rel=1e-10, abs=1e-10)


def test_canonical_merge_and_drop():
    a = Polynomial(1, {(1, 0): 1.0, (0, 1): 2.0})
    b = Polynomial(1, {(1, 0): -1.0})
    assert (a + b) == Polynomial(1, {(0, 1): 2.0})
    assert (a - a).is_zero()
    # relative dust is removed so transient terms cancel cleanly
    c = Polynomial(1, {(2, 0): 1.0, (0, 4): 1e-17})
    assert len(c) == 1


def test_term_order_is_canonical():
    a = Polynomial(1, {(0, 2): 1.0, (2, 0): 1.0, (1, 1): 1.0})
    assert list(a.terms) == sorted(a.terms)


def test_degrees():
    q, p = Polynomial.q(2, 0), Polynomial.p(2, 1)
    poly = q ** 3 * p ** 2 + p
    assert (poly.degree(), poly.p_degree(), poly.q_degree()) == (5, 2, 3)


def test_from_monomials_roundtrip():
    ms = [Monomial(2.0, (1, 0), (0, 1)), Monomial(-1.0, (0, 0), (2, 0))]
    poly = Polynomial.from_monomials(ms)
    assert sorted(poly.monomials(), key=str) == sorted(ms, key=str)


def test_vectorized_evaluate():
    poly = Polynomial.q(1, 0) ** 2 + Polynomial.p(1, 0)
    q = np.array([[1.0], [2.0]])
    p = np.array([[0.5], [-1.0]])
    np.testing.assert_allclose(poly.evaluate(q, p), [1.5, 3.0])


def test_budget():
    x = Polynomial.q(2, 0, term_budget=10) + Polynomial.q(2, 1, term_budget=10) + 1.0
    with pytest.raises(PolynomialBlowupError):
        x ** 6


def test_bad_construction():
    with pytest.raises(ValueError):
        Polynomial(1, {(1, 2, 3): 1.0})
    with pytest.raises(ValueError):
        Polynomial(1, {(-1, 0): 1.0})
    with pytest.raises(ValueError):
        Polynomial.q(1, 0) + Polynomial.q(2, 0)
