import math

import numpy as np
import pytest

from erps import circuits as C
from erps.errors import PolynomialBlowupError, UnknownGateError
from erps.polynomial import Polynomial
from erps.sampling import PhasePoint

q1 = Polynomial.q(1, 0)
p1 = Polynomial.p(1, 0)


def _pt(q, p):
    return PhasePoint(np.atleast_1d(q), np.atleast_1d(p), 0.0)


def test_identity_map():
    ident = C.affine(np.eye(1), np.zeros((1, 1)), np.zeros((1, 1)), np.eye(1))
    out = C.apply_map(ident, _pt(0.3, -0.3))
    assert (out.q[0], out.p[0]) == (0.3, -0.3)


def test_squeeze_ln2():
    out = C.apply_map(C.squeeze(math.log(2)), _pt(1.0, 1.0))
    assert out.q[0] == pytest.approx(0.5) and out.p[0] == pytest.approx(2.0)


@pytest.mark.parametrize("gate", [C.cubic_kick(1.0), C.position_kick(q1 ** 3 * (1 / 3))])
def test_cubic_kick_point(gate):
    out = C.apply_map(gate, _pt(2.0, 0.0))
    assert (out.q[0], out.p[0]) == (2.0, 4.0)


def test_rotation_quarter_turn():
    out = C.apply_map(C.rotation(math.pi / 2), _pt(1.0, 0.0))
    assert out.q[0] == pytest.approx(0.0, abs=1e-15) and out.p[0] == pytest.approx(-1.0)


def test_displacement_point():
    out = C.apply_map(C.displacement(1.0, -2.0), _pt(0.0, 0.0))
    assert (out.q[0], out.p[0]) == (1.0, -2.0)


def test_xi_unchanged():
    pt = PhasePoint(np.array([0.1]), np.array([0.2]), 1.0)
    assert C.apply_map(C.rotation(0.3), pt).xi == 1.0


def test_symplectic_checks():
    ok, res = C.is_symplectic(C.rotation(math.pi / 7))
    assert ok and res < 1e-12
    bad = C.affine(2 * np.eye(1), np.zeros((1, 1)), np.zeros((1, 1)), np.eye(1))
    assert not C.is_symplectic(bad)[0]
    assert C.is_symplectic(C.beamsplitter(math.pi / 4, 0, 1, 2))[0]


def test_beamsplitter_matrix_50_50():
    bs = C.beamsplitter(math.pi / 4, 0, 1, 2)
    s = 1 / math.sqrt(2)
    block = np.array([[s, -s], [s, s]])
    np.testing.assert_allclose(bs.A, block, atol=1e-15)
    np.testing.assert_allclose(bs.D, block, atol=1e-15)
    assert not bs.B.any() and not bs.C.any()


@pytest.mark.parametrize("gate", [
    C.displacement(0.4, -1.1, 1, 3), C.rotation(0.9, 2, 3), C.squeeze(-0.6, 0, 3),
    C.beamsplitter(0.3, 0, 2, 3), C.shear(1.7, 1, 3),
])
def test_library_gaussian_gates_symplectic(gate):
    assert C.is_symplectic(gate)[0]


def _numeric_jacobian(gate, x, h=1e-6):
    n = gate.modes
    J = np.empty((2 * n, 2 * n))
    for k in range(2 * n):
        e = np.zeros(2 * n)
        e[k] = h
        qp, pp = gate.apply((x + e)[:n], (x + e)[n:])
        qm, pm = gate.apply((x - e)[:n], (x - e)[n:])
        J[:, k] = (np.concatenate([qp, pp]) - np.concatenate([qm, pm])) / (2 * h)
    return J


@pytest.mark.parametrize("gate", [
    C.cubic_kick(1.3),
    C.momentum_drift(Polynomial.p(1, 0) ** 3 * (1 / 3)),
    C.position_kick(Polynomial.q(2, 0) ** 2 * Polynomial.q(2, 1) + Polynomial.q(2, 1) ** 4),
    C.momentum_drift(Polynomial.p(2, 0) * Polynomial.p(2, 1) ** 2),
])
def test_shear_unit_jacobian(gate, rng):
    for _ in range(50):
        x = rng.uniform(-1.5, 1.5, 2 * gate.modes)
        assert abs(np.linalg.det(_numeric_jacobian(gate, x)) - 1.0) < 1e-6


def test_kick_potential_must_be_position_only():
    with pytest.raises(ValueError):
        C.position_kick(p1 ** 2)
    with pytest.raises(ValueError):
        C.momentum_drift(q1 ** 2)


def test_gate_library_names():
    assert isinstance(C.gate_library("rotation", {"theta": 0.1}), C.AffineMap)
    assert isinstance(C.gate_library("cubic_kick", {"lambda": 1.0}), C.PolynomialShearMap)
    with pytest.raises(UnknownGateError):
        C.gate_library("teleport", {})


def test_compose_quarter_rotation():
    sym = C.compose_symbolic(C.Circuit(1, [C.rotation(math.pi / 2)]))
    assert sym.f_expr[0].allclose(p1, atol=1e-15)
    assert sym.g_expr[0].allclose(-q1, atol=1e-15)


def test_compose_kick_then_rotation():
    sym = C.compose_symbolic(C.Circuit(1, [C.cubic_kick(1.0), C.rotation(math.pi / 2)]))
    assert sym.f_expr[0].allclose(p1 + q1 ** 2, atol=1e-15)
    assert sym.g_expr[0].allclose(-q1, atol=1e-15)


def test_compose_empty_is_identity():
    sym = C.compose_symbolic(C.Circuit(2, []))
    assert sym.f_expr == (Polynomial.q(2, 0), Polynomial.q(2, 1))
    assert sym.g_expr == (Polynomial.p(2, 0), Polynomial.p(2, 1))


def _random_circuit(rng, modes=2, depth=6):
    gates = []
    for _ in range(depth):
        kind = rng.integers(6)
        m = int(rng.integers(modes))
        if kind == 0:
            gates.append(C.rotation(rng.uniform(-3, 3), m, modes))
        elif kind == 1:
            gates.append(C.squeeze(rng.uniform(-0.5, 0.5), m, modes))
        elif kind == 2:
            gates.append(C.beamsplitter(rng.uniform(-1, 1), 0, 1, modes))
        elif kind == 3:
            gates.append(C.displacement(rng.normal(), rng.normal(), m, modes))
        elif kind == 4:
            gates.append(C.cubic_kick(rng.uniform(-0.5, 0.5), m, modes))
        else:
            gates.append(C.shear(rng.uniform(-1, 1), m, modes))
    return C.Circuit(modes, gates)


def test_symbolic_agrees_with_numeric(rng):
    for _ in range(10):
        circ = _random_circuit(rng)
        sym = C.compose_symbolic(circ)
        q, p = rng.normal(size=(100, 2)), rng.normal(size=(100, 2))
        qn, pn = circ.evolve(q, p)
        qs, ps = sym.evaluate(q, p)
        np.testing.assert_allclose(qs, qn, rtol=1e-10, atol=1e-10)
        np.testing.assert_allclose(ps, pn, rtol=1e-10, atol=1e-10)


def test_composition_associative(rng):
    circ = _random_circuit(rng, depth=7)
    whole = C.compose_symbolic(circ)
    for k in range(len(circ) + 1):
        first, second = circ.split(k)
        a = C.compose_symbolic(first)
        images = a.images()
        b = C.compose_symbolic(second)
        joined = [e.substitute(images) for e in b.images()]
        for x, y in zip(joined, whole.images()):
            assert x.allclose(y, rtol=1e-12, atol=1e-12)


def test_apply_circuit_matches_sequential_apply_map(rng):
    circ = _random_circuit(rng)
    pt = PhasePoint(rng.normal(size=2), rng.normal(size=2), -1.0)
    seq = pt
    for g in circ.maps:
        seq = C.apply_map(g, seq)
    out = C.apply_circuit(circ, pt)
    assert np.array_equal(out.q, seq.q) and np.array_equal(out.p, seq.p)


def test_affine_total_and_inverse(rng):
    circ = C.Circuit(2, [C.squeeze(0.3, 0, 2), C.displacement(1, 2, 1, 2), C.beamsplitter(0.4, 0, 1, 2)])
    total = circ.affine_total()
    q, p = rng.normal(size=(5, 2)), rng.normal(size=(5, 2))
    np.testing.assert_allclose(np.hstack(total.apply(q, p)), np.hstack(circ.evolve(q, p)), atol=1e-12)
    back = total.inverse().apply(*total.apply(q, p))
    np.testing.assert_allclose(np.hstack(back), np.hstack([q, p]), atol=1e-12)


def test_shear_inverse_round_trip(rng):
    g = C.momentum_drift(Polynomial.p(1, 0) ** 3 * (1 / 3))
    q, p = rng.normal(size=(10, 1)), rng.normal(size=(10, 1))
    q2, p2 = g.inverse().apply(*g.apply(q, p))
    np.testing.assert_allclose(q2, q, atol=1e-12)
    np.testing.assert_allclose(p2, p, atol=1e-12)


def test_term_budget_guard():
    circ = C.Circuit(2, [C.cubic_kick(1.0, 0, 2), C.beamsplitter(0.3, 0, 1, 2),
                         C.momentum_drift(Polynomial.p(2, 0) ** 3 + Polynomial.p(2, 1) ** 3)] * 3)
    with pytest.raises(PolynomialBlowupError):
        C.compose_symbolic(circ, term_budget=200)


def test_mode_mismatch_rejected():
    with pytest.raises(ValueError):
        C.Circuit(2, [C.rotation(0.1)])
