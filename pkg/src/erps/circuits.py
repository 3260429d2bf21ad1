"""Deterministic phase-space maps and their composition.

Two families of gates are supported:

* ``AffineMap``: ``q' = A q + B p + q0``, ``p' = C q + D p + p0``.
* ``PolynomialShearMap``: a position kick ``p' = p + grad V(q)`` or a
  momentum drift ``q' = q + grad W(p)``; both are symplectic by construction.

Samples are evolved numerically with ``apply_map``; ``compose_symbolic``
produces the exact polynomial form of the whole circuit for admissibility
checks and the oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Sequence, Union

import numpy as np

from .errors import UnknownGateError
from .polynomial import DEFAULT_TERM_BUDGET, Polynomial
from .sampling import PhasePoint

SYMPLECTIC_TOL = 1e-10


def symplectic_form(n: int) -> np.ndarray:
    """``J`` in the ``(q_0..q_{n-1}, p_0..p_{n-1})`` ordering."""
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return np.block([[zero, eye], [-eye, zero]])


@dataclass(frozen=True)
class AffineMap:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    q0: np.ndarray
    p0: np.ndarray
    name: str = "affine"

    def __post_init__(self):
        for attr in ("A", "B", "C", "D"):
            object.__setattr__(self, attr, np.atleast_2d(np.asarray(getattr(self, attr), dtype=float)))
        for attr in ("q0", "p0"):
            object.__setattr__(self, attr, np.atleast_1d(np.asarray(getattr(self, attr), dtype=float)))
        n = self.A.shape[0]
        if any(m.shape != (n, n) for m in (self.A, self.B, self.C, self.D)):
            raise ValueError("A, B, C, D must all be N x N")
        if self.q0.shape != (n,) or self.p0.shape != (n,):
            raise ValueError("q0 and p0 must have length N")

    @classmethod
    def from_matrix(cls, M, shift=None, name="affine") -> "AffineMap":
        M = np.asarray(M, dtype=float)
        n = M.shape[0] // 2
        shift = np.zeros(2 * n) if shift is None else np.asarray(shift, dtype=float)
        return cls(M[:n, :n], M[:n, n:], M[n:, :n], M[n:, n:], shift[:n], shift[n:], name=name)

    @property
    def modes(self) -> int:
        return self.A.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        return np.block([[self.A, self.B], [self.C, self.D]])

    @property
    def shift(self) -> np.ndarray:
        return np.concatenate([self.q0, self.p0])

    def apply(self, q, p):
        q = np.asarray(q, dtype=float)
        p = np.asarray(p, dtype=float)
        return (q @ self.A.T + p @ self.B.T + self.q0,
                q @ self.C.T + p @ self.D.T + self.p0)

    def act_symbolic(self, fs: Sequence[Polynomial], gs: Sequence[Polynomial]):
        n = self.modes
        new_f, new_g = [], []
        for i in range(n):
            f = Polynomial.constant(fs[0].modes, self.q0[i], term_budget=fs[0].term_budget)
            g = Polynomial.constant(fs[0].modes, self.p0[i], term_budget=fs[0].term_budget)
            for j in range(n):
                if self.A[i, j]:
                    f = f + fs[j] * self.A[i, j]
                if self.B[i, j]:
                    f = f + gs[j] * self.B[i, j]
                if self.C[i, j]:
                    g = g + fs[j] * self.C[i, j]
                if self.D[i, j]:
                    g = g + gs[j] * self.D[i, j]
            new_f.append(f)
            new_g.append(g)
        return new_f, new_g

    def inverse(self) -> "AffineMap":
        Minv = np.linalg.inv(self.matrix)
        return AffineMap.from_matrix(Minv, -Minv @ self.shift, name=f"{self.name}^-1")


@dataclass(frozen=True)
class PolynomialShearMap:
    """``kind='kick'``: ``p' = p + grad V(q)``; ``kind='drift'``: ``q' = q + grad W(p)``.

    ``potential`` is a polynomial on ``modes`` modes that must depend only on
    ``q`` (kick) or only on ``p`` (drift).
    """

    kind: str
    potential: Polynomial
    name: str = ""
    _grad: tuple = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in ("kick", "drift"):
            raise ValueError("kind must be 'kick' or 'drift'")
        n = self.potential.modes
        keys = self.potential.terms
        if self.kind == "kick" and any(sum(k[n:]) for k in keys):
            raise ValueError("kick potential must depend on q only")
        if self.kind == "drift" and any(sum(k[:n]) for k in keys):
            raise ValueError("drift potential must depend on p only")
        offset = 0 if self.kind == "kick" else n
        grad = tuple(self.potential.derivative(offset + k) for k in range(n))
        object.__setattr__(self, "_grad", grad)
        if not self.name:
            object.__setattr__(self, "name", self.kind)

    @property
    def modes(self) -> int:
        return self.potential.modes

    @property
    def gradient(self) -> tuple:
        return self._grad

    def apply(self, q, p):
        q = np.asarray(q, dtype=float)
        p = np.asarray(p, dtype=float)
        grad = np.stack([g.evaluate(q, p) for g in self._grad], axis=-1)
        if self.kind == "kick":
            return q, p + grad
        return q + grad, p

    def act_symbolic(self, fs, gs):
        images = list(fs) + list(gs)
        delta = [g.substitute(images) for g in self._grad]
        if self.kind == "kick":
            return list(fs), [g + d for g, d in zip(gs, delta)]
        return [f + d for f, d in zip(fs, delta)], list(gs)

    def inverse(self) -> "PolynomialShearMap":
        return PolynomialShearMap(self.kind, -self.potential, name=f"{self.name}^-1")


PhaseMap = Union[AffineMap, PolynomialShearMap]


@dataclass(frozen=True)
class Circuit:
    modes: int
    maps: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "maps", tuple(self.maps))
        for m in self.maps:
            if m.modes != self.modes:
                raise ValueError(f"gate {m.name} acts on {m.modes} modes, circuit has {self.modes}")

    def __len__(self):
        return len(self.maps)

    def __add__(self, other: "Circuit") -> "Circuit":
        return Circuit(self.modes, self.maps + other.maps)

    def split(self, index: int):
        return Circuit(self.modes, self.maps[:index]), Circuit(self.modes, self.maps[index:])

    def evolve(self, q, p):
        for m in self.maps:
            q, p = m.apply(q, p)
        return q, p

    def is_affine(self) -> bool:
        return all(isinstance(m, AffineMap) for m in self.maps)

    def affine_total(self) -> AffineMap:
        """Single affine map equal to the whole (affine-only) circuit."""
        n = self.modes
        M = np.eye(2 * n)
        shift = np.zeros(2 * n)
        for m in self.maps:
            if not isinstance(m, AffineMap):
                raise ValueError("circuit contains non-affine gates")
            M = m.matrix @ M
            shift = m.matrix @ shift + m.shift
        return AffineMap.from_matrix(M, shift, name="total")


def apply_map(phase_map: PhaseMap, point: PhasePoint) -> PhasePoint:
    if point.modes != phase_map.modes:
        raise ValueError("dimension mismatch between map and point")
    q, p = phase_map.apply(point.q, point.p)
    return PhasePoint(q, p, point.xi)


def apply_circuit(circuit: Circuit, point: PhasePoint) -> PhasePoint:
    q, p = circuit.evolve(point.q, point.p)
    return PhasePoint(q, p, point.xi)


def is_symplectic(phase_map: AffineMap, tol: float = SYMPLECTIC_TOL):
    """Return ``(ok, residual)`` with residual ``||M J M^T - J||_F``."""
    M = phase_map.matrix
    J = symplectic_form(phase_map.modes)
    residual = float(np.linalg.norm(M @ J @ M.T - J))
    return residual <= tol, residual


@dataclass(frozen=True)
class SymbolicMap:
    """Forward map ``(q, p) -> (q_T, p_T)`` as polynomials in the initial variables."""

    f_expr: tuple
    g_expr: tuple

    @property
    def modes(self) -> int:
        return len(self.f_expr)

    def images(self) -> list:
        return list(self.f_expr) + list(self.g_expr)

    def evaluate(self, q, p):
        return (np.stack([f.evaluate(q, p) for f in self.f_expr], axis=-1),
                np.stack([g.evaluate(q, p) for g in self.g_expr], axis=-1))


def identity_symbolic(modes: int, term_budget: int = DEFAULT_TERM_BUDGET) -> SymbolicMap:
    return SymbolicMap(tuple(Polynomial.q(modes, k, term_budget=term_budget) for k in range(modes)),
                       tuple(Polynomial.p(modes, k, term_budget=term_budget) for k in range(modes)))


def compose_symbolic(circuit: Circuit, term_budget: int = DEFAULT_TERM_BUDGET) -> SymbolicMap:
    sym = identity_symbolic(circuit.modes, term_budget)
    fs, gs = list(sym.f_expr), list(sym.g_expr)
    for m in circuit.maps:
        fs, gs = m.act_symbolic(fs, gs)
    return SymbolicMap(tuple(fs), tuple(gs))


# ---------------------------------------------------------------------------
# gate library

def _embed(n: int, modes: Sequence[int], block: np.ndarray) -> np.ndarray:
    """Embed a ``2k x 2k`` symplectic block acting on ``modes`` into ``2n x 2n``."""
    k = len(modes)
    M = np.eye(2 * n)
    idx = list(modes) + [n + m for m in modes]
    for a in range(2 * k):
        for b in range(2 * k):
            M[idx[a], idx[b]] = block[a, b]
    return M


def _check_mode(mode: int, n: int):
    if not (0 <= int(mode) < n):
        raise ValueError(f"mode {mode} out of range for {n} modes")
    return int(mode)


def displacement(q0: float = 0.0, p0: float = 0.0, mode: int = 0, modes: int = 1) -> AffineMap:
    mode = _check_mode(mode, modes)
    shift = np.zeros(2 * modes)
    shift[mode] = q0
    shift[modes + mode] = p0
    return AffineMap.from_matrix(np.eye(2 * modes), shift, name="displacement")


def rotation(theta: float, mode: int = 0, modes: int = 1) -> AffineMap:
    mode = _check_mode(mode, modes)
    c, s = math.cos(theta), math.sin(theta)
    return AffineMap.from_matrix(_embed(modes, [mode], np.array([[c, s], [-s, c]])), name="rotation")


def squeeze(r: float, mode: int = 0, modes: int = 1) -> AffineMap:
    mode = _check_mode(mode, modes)
    block = np.diag([math.exp(-r), math.exp(r)])
    return AffineMap.from_matrix(_embed(modes, [mode], block), name="squeeze")


def beamsplitter(theta: float, i: int = 0, j: int = 1, modes: int = 2) -> AffineMap:
    i, j = _check_mode(i, modes), _check_mode(j, modes)
    if i == j:
        raise ValueError("beamsplitter needs two distinct modes")
    c, s = math.cos(theta), math.sin(theta)
    R = np.array([[c, -s], [s, c]])
    block = np.zeros((4, 4))
    block[:2, :2] = R
    block[2:, 2:] = R
    return AffineMap.from_matrix(_embed(modes, [i, j], block), name="beamsplitter")


def shear(lam: float, mode: int = 0, modes: int = 1) -> AffineMap:
    mode = _check_mode(mode, modes)
    return AffineMap.from_matrix(_embed(modes, [mode], np.array([[1.0, 0.0], [lam, 1.0]])), name="shear")


def cubic_kick(lam: float, mode: int = 0, modes: int = 1) -> PolynomialShearMap:
    """``p' = p + lam q^2`` on one mode (kick with ``V = lam q^3 / 3``)."""
    mode = _check_mode(mode, modes)
    V = Polynomial.q(modes, mode) ** 3 * (lam / 3.0)
    return PolynomialShearMap("kick", V, name="cubic_kick")


def position_kick(potential: Polynomial) -> PolynomialShearMap:
    return PolynomialShearMap("kick", potential, name="kick")


def momentum_drift(potential: Polynomial) -> PolynomialShearMap:
    return PolynomialShearMap("drift", potential, name="drift")


def affine(A, B, C, D, q0=None, p0=None) -> AffineMap:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    return AffineMap(A, B, C, D, np.zeros(n) if q0 is None else q0, np.zeros(n) if p0 is None else p0)


def gate_library(name: str, params: dict, modes: int = 1) -> PhaseMap:
    """Build a gate from its config name and parameters."""
    params = dict(params)
    try:
        if name == "displacement":
            return displacement(params.get("q0", 0.0), params.get("p0", 0.0), params.get("mode", 0), modes)
        if name == "rotation":
            return rotation(params["theta"], params.get("mode", 0), modes)
        if name == "squeeze":
            return squeeze(params["r"], params.get("mode", 0), modes)
        if name == "beamsplitter":
            i, j = params.get("modes", (0, 1))
            return beamsplitter(params["theta"], i, j, modes)
        if name == "shear":
            return shear(params["lambda"], params.get("mode", 0), modes)
        if name == "cubic_kick":
            return cubic_kick(params["lambda"], params.get("mode", 0), modes)
        if name in ("kick", "drift"):
            pot = params["potential"]
            if not isinstance(pot, Polynomial):
                raise ValueError("kick/drift need a Polynomial potential")
            return PolynomialShearMap(name, pot)
        if name == "affine":
            n = modes
            return AffineMap(params["A"], params.get("B", np.zeros((n, n))),
                             params.get("C", np.zeros((n, n))), params["D"],
                             params.get("q0", np.zeros(n)), params.get("p0", np.zeros(n)))
    except KeyError as exc:
        raise ValueError(f"gate {name!r} is missing parameter {exc.args[0]!r}") from exc
    raise UnknownGateError(f"unknown gate {name!r}")


def build_circuit(gates: List[PhaseMap], modes: int) -> Circuit:
    return Circuit(modes, tuple(gates))
