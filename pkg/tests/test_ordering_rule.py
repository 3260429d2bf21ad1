"""The restricted phase-space average of ``F(q) p^b`` equals the oracle value of its quantized form.

Both sides are computed deterministically: the left side by quadrature over
``q`` and an exact average over the two-point law of ``xi``.
"""

import itertools

import numpy as np
import pytest

from erps import states as S
from erps.circuits import Circuit
from erps.oracle import exact_expectation
from erps.polynomial import Monomial, Polynomial

GRID = np.linspace(-14, 14, 280_000)  # even count: no point lands on a symmetric node


def restricted_moment(state, a, b, xi):
    x = GRID[:, None]
    rho = state.density(x)
    keep = rho > 1e-300
    xk = x[keep]
    mom = state.phase_gradient(xk)[:, 0] + 0.5 * xi * state.grad_log_density(xk)[:, 0]
    f = np.zeros_like(GRID)
    f[keep] = rho[keep] * xk[:, 0] ** a * mom ** b
    return np.trapezoid(f, GRID)


def restricted_average(factors, q_exp, p_exp, hbar=1.0):
    total = 0.0
    for xi in (hbar, -hbar):
        prod = 1.0
        for st, a, b in zip(factors, q_exp, p_exp):
            prod *= restricted_moment(st, a, b, xi)
        total += 0.5 * prod
    return total


STATES = {
    "vacuum": S.vacuum_state(),
    "coherent": S.CoherentState(1 + 0.5j),
    "squeezed": S.SqueezedState(0.8),
    "fock1": S.FockState(1),
    "fock2": S.FockState(2),
    "cat": S.CatState(2.0),
    "odd_cat": S.CatState(1.2 - 0.3j, relative_sign=-1),
}
MONOMIALS = [(a, b) for a in range(4) for b in range(3)]


@pytest.mark.parametrize("name", sorted(STATES))
def test_single_mode_rule(name):
    st = STATES[name]
    for a, b in MONOMIALS:
        obs = Polynomial.from_monomials([Monomial(1.0, (a,), (b,))])
        exact = exact_expectation(st, Circuit(1, []), obs).value
        er = restricted_average([st], (a,), (b,))
        assert er == pytest.approx(exact, rel=1e-6, abs=1e-7), (a, b)


def test_vacuum_p_q2_p():
    # <0| p q^2 p |0> = ||q p|0>||^2 = (1/2)(3/2) = 3/4
    obs = Polynomial.from_monomials([Monomial(1.0, (2,), (2,))])
    assert exact_expectation(S.vacuum_state(), Circuit(1, []), obs).value == pytest.approx(0.75, abs=1e-10)
    assert restricted_average([S.vacuum_state()], (2,), (2,)) == pytest.approx(0.75, abs=1e-9)


PAIRS = [("vacuum", "fock1"), ("coherent", "cat"), ("squeezed", "fock2")]
CROSS = [((1, 1), (1, 1)), ((0, 2), (1, 1)), ((2, 1), (0, 1)), ((1, 0), (1, 1)), ((1, 1), (2, 0))]


@pytest.mark.parametrize("pair", PAIRS)
def test_cross_mode_rule(pair):
    factors = [STATES[n] for n in pair]
    prod = S.ProductState(factors)
    for qe, pe in CROSS:
        obs = Polynomial.from_monomials([Monomial(1.0, qe, pe)])
        exact = exact_expectation(prod, Circuit(2, []), obs, levels=48).value
        er = restricted_average(factors, qe, pe)
        assert er == pytest.approx(exact, rel=1e-6, abs=1e-7), (qe, pe)


def test_three_mode_cross_terms():
    factors = [STATES["fock1"], STATES["coherent"], STATES["vacuum"]]
    prod = S.ProductState(factors)
    for qe, pe in [((0, 0, 1), (1, 1, 0)), ((1, 0, 0), (0, 1, 1)), ((1, 1, 1), (1, 0, 1))]:
        obs = Polynomial.from_monomials([Monomial(1.0, qe, pe)])
        exact = exact_expectation(prod, Circuit(3, []), obs, levels=24).value
        assert restricted_average(factors, qe, pe) == pytest.approx(exact, rel=1e-6, abs=1e-7)
