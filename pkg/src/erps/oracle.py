"""Exact expectation values in a truncated number basis (up to three modes).

The circuit is handled in the Heisenberg picture: the observable is pulled
back through the composed phase-space map, quantized with the ordering
rule of :func:`erps.observables.quantize`, and sandwiched in the state's
number-basis vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import norm as sparse_norm

from .circuits import Circuit, compose_symbolic
from .errors import OracleDimensionError, TruncationInsufficientError
from .observables import QuantizedOperatorSpec, pullback, quantize, require_admissible
from .polynomial import Polynomial
from .states import GaussianPureState, MixtureState, ProductState, StateModel

MAX_MODES = 3
MAX_BASIS_DIM = 1 << 20
NORM_TOL = 1e-8
CONVERGENCE_RTOL = 1e-6
AUTO_TAIL_TOL = 1e-12
AUTO_MAX_LEVELS = 160


def annihilation(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1)


@dataclass(frozen=True)
class TruncatedBasis:
    modes: int
    levels: int
    hbar: float = 1.0

    def __post_init__(self):
        if not 1 <= self.modes <= MAX_MODES:
            raise OracleDimensionError(f"oracle supports 1..{MAX_MODES} modes, got {self.modes}")
        if self.levels < 2:
            raise ValueError("need at least two levels per mode")
        if self.dim > MAX_BASIS_DIM:
            raise OracleDimensionError(
                f"basis dimension {self.levels}^{self.modes} = {self.dim} exceeds {MAX_BASIS_DIM}")

    @property
    def dim(self) -> int:
        return self.levels ** self.modes

    def quadratures(self, size: Optional[int] = None):
        """Single-mode ``(q, p)`` matrices of the given size (default ``levels``)."""
        a = annihilation(size or self.levels)
        s = math.sqrt(self.hbar / 2.0)
        return s * (a + a.T) + 0j, 1j * s * (a.T - a)

    def commutator_residual(self) -> float:
        """Deviation of ``[q, p] / (i hbar)`` from the identity away from the top level."""
        q, p = self.quadratures()
        c = (q @ p - p @ q) / (1j * self.hbar)
        k = self.levels - 2
        return float(np.abs(c[:k, :k] - np.eye(k)).max())


def _mode_factor(q: np.ndarray, p: np.ndarray, a: int, pattern: str, D: int) -> np.ndarray:
    """Single-mode factor computed at padded size and cropped to ``D``.

    pattern: '' -> q^a, 'L' -> p q^a, 'R' -> q^a p, 'LR' -> p q^a p, 'S' -> (q^a p + p q^a) / 2
    """
    F = np.linalg.matrix_power(q, a) if a else np.eye(q.shape[0], dtype=complex)
    if pattern == "":
        M = F
    elif pattern == "L":
        M = p @ F
    elif pattern == "R":
        M = F @ p
    elif pattern == "LR":
        M = p @ F @ p
    elif pattern == "S":
        M = 0.5 * (F @ p + p @ F)
    else:
        raise ValueError(pattern)
    return M[:D, :D]


def build_operator(spec: QuantizedOperatorSpec, basis: TruncatedBasis) -> sp.csr_matrix:
    """Hermitian matrix of a quantized observable on the truncated basis."""
    if spec.modes != basis.modes:
        raise ValueError("operator and basis act on different mode counts")
    D = basis.levels
    max_deg = max((sum(t.q_exponents) + (t.p_left is not None) + (t.p_right is not None)
                   for t in spec.terms), default=0)
    q, p = basis.quadratures(D + max_deg + 2)
    cache: dict = {}

    def factor(a, pattern):
        key = (a, pattern)
        if key not in cache:
            cache[key] = sp.csr_matrix(_mode_factor(q, p, a, pattern, D))
        return cache[key]

    def kron_all(patterns, exps):
        mats = [factor(exps[k], patterns[k]) for k in range(basis.modes)]
        return reduce(lambda x, y: sp.kron(x, y, format="csr"), mats)

    H = sp.csr_matrix((basis.dim, basis.dim), dtype=complex)
    for t in spec.terms:
        pats = [""] * basis.modes
        if t.p_left is None:
            H = H + t.coeff * kron_all(pats, t.q_exponents)
        elif t.p_right is None:
            pats[t.p_left] = "S"
            H = H + t.coeff * kron_all(pats, t.q_exponents)
        elif t.p_left == t.p_right:
            pats[t.p_left] = "LR"
            H = H + t.coeff * kron_all(pats, t.q_exponents)
        else:
            m, n = t.p_left, t.p_right
            a, b = list(pats), list(pats)
            a[m], a[n] = "L", "R"
            b[m], b[n] = "R", "L"
            H = H + 0.5 * t.coeff * (kron_all(a, t.q_exponents) + kron_all(b, t.q_exponents))
    return H.tocsr()


def hermiticity_residual(H) -> float:
    diff = H - H.conj().T
    return float(sparse_norm(diff)) if sp.issparse(diff) else float(np.linalg.norm(diff))


def state_vector(state: StateModel, levels: int) -> np.ndarray:
    """Number-basis coefficients of a pure state, checked for truncation loss."""
    vec = np.asarray(state.fock_amplitudes(levels), dtype=complex)
    norm = float(np.vdot(vec, vec).real)
    if abs(norm - 1.0) > NORM_TOL:
        raise TruncationInsufficientError(
            f"state norm {norm:.12f} after truncation to {levels} levels per mode")
    return vec


def _pure_components(state):
    if isinstance(state, MixtureState):
        return list(zip(state.weights, state.components))
    return [(1.0, state)]


def auto_levels(state: StateModel, tail_tol: float = AUTO_TAIL_TOL,
                max_levels: int = AUTO_MAX_LEVELS, minimum: int = 16) -> int:
    """Smallest per-mode truncation whose discarded norm is below ``tail_tol``."""
    best = minimum
    for _, comp in _pure_components(state):
        factors = comp.factors if isinstance(comp, ProductState) else [comp]
        for f in factors:
            amp = np.abs(np.asarray(f.fock_amplitudes(max_levels))) ** 2
            tail = amp.sum() - np.cumsum(amp)
            ok = np.flatnonzero(tail < tail_tol)
            need = int(ok[0]) + 1 if ok.size else max_levels
            best = max(best, need)
    return best


def _expectation_at(state, spec, modes, levels, hbar):
    basis = TruncatedBasis(modes, levels, hbar)
    H = build_operator(spec, basis)
    total = 0j
    for w, comp in _pure_components(state):
        vec = state_vector(comp, levels)
        total += w * np.vdot(vec, H @ vec)
    return total


@dataclass
class OracleResult:
    value: float
    imag_residual: float
    D_used: int
    converged: bool
    check_value: Optional[float] = None

    def as_dict(self):
        return {"value": self.value, "imag_residual": self.imag_residual,
                "D_used": self.D_used, "converged": self.converged}


def heisenberg_operator(circuit: Circuit, obs: Polynomial) -> QuantizedOperatorSpec:
    pulled = pullback(obs, compose_symbolic(circuit, obs.term_budget))
    require_admissible(pulled)
    return quantize(pulled)


def _max_levels_for(modes: int) -> int:
    return int(math.floor(MAX_BASIS_DIM ** (1.0 / modes) + 1e-9))


def exact_expectation(state: StateModel, circuit: Circuit, obs: Polynomial,
                      levels: Optional[int] = None) -> OracleResult:
    """``<psi| U^dag O U |psi>`` by exact linear algebra in a truncated basis.

    The truncation is cross-checked at (up to) twice the level count; a
    relative change above ``1e-6`` raises ``TruncationInsufficientError``.
    """
    modes = state.modes
    if modes > MAX_MODES:
        raise OracleDimensionError(f"oracle supports at most {MAX_MODES} modes")
    spec = heisenberg_operator(circuit, obs)
    if levels is None:
        levels = auto_levels(state)
    cap = _max_levels_for(modes)
    if levels > cap:
        raise OracleDimensionError(f"{levels} levels on {modes} modes exceeds the basis budget")
    value = _expectation_at(state, spec, modes, levels, state.hbar)
    check_levels = min(2 * levels, cap)
    converged = False
    check = None
    if check_levels > levels:
        check = _expectation_at(state, spec, modes, check_levels, state.hbar).real
        gap = abs(check - value.real)
        if gap > CONVERGENCE_RTOL * max(abs(check), 1e-4):
            raise TruncationInsufficientError(
                f"oracle value moved by {gap:.3e} between {levels} and {check_levels} levels")
        converged = True
    return OracleResult(float(value.real), float(abs(value.imag)), levels, converged, check)


def truncation_sweep(state: StateModel, circuit: Circuit, obs: Polynomial,
                     D_list: Iterable[int]) -> list[dict]:
    """Expectation per truncation level; ``converged`` once successive change < 1e-6."""
    spec = heisenberg_operator(circuit, obs)
    rows = []
    prev = None
    for D in D_list:
        basis = TruncatedBasis(state.modes, D, state.hbar)
        H = build_operator(spec, basis)
        total = 0j
        for w, comp in _pure_components(state):
            vec = np.asarray(comp.fock_amplitudes(D), dtype=complex)
            total += w * np.vdot(vec, H @ vec)
        v = float(total.real)
        rel = None if prev is None else abs(v - prev) / max(abs(v), 1e-12)
        rows.append({"D": D, "value": v, "rel_change": rel,
                     "converged": rel is not None and rel < CONVERGENCE_RTOL})
        prev = v
    return rows


def propagate_gaussian_moments(state: GaussianPureState, circuit: Circuit):
    """Closed-form mean vector and covariance after an affine circuit."""
    total = circuit.affine_total()
    M = total.matrix
    mean = M @ state.mean_vector() + total.shift
    cov = M @ state.covariance() @ M.T
    return mean, cov
