"""Computationally trackable initial states.

Every state exposes the polar data of its wave function
``psi(q) = sqrt(rho(q)) * exp(i S(q) / hbar)``: the log density, the
gradient of the log density (``d rho / rho``), the phase gradient
(``dS``), and an efficient position sampler.  Point-wise methods take
arrays of shape ``(..., N)``.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import linalg, special, stats
from scipy.interpolate import CubicSpline

from .errors import InvalidStateError

# densities below this are treated as nodes
DENSITY_FLOOR = 1e-300


@dataclass(frozen=True)
class HbarConfig:
    hbar: float = 1.0

    def __post_init__(self):
        if not (self.hbar > 0 and math.isfinite(self.hbar)):
            raise ValueError(f"hbar must be positive and finite, got {self.hbar}")


class StateModel(ABC):
    """Contract shared by all preparable states."""

    modes: int
    hbar: float

    @abstractmethod
    def log_density(self, q) -> np.ndarray:
        ...

    @abstractmethod
    def grad_log_density(self, q) -> np.ndarray:
        ...

    @abstractmethod
    def phase_gradient(self, q) -> np.ndarray:
        ...

    @abstractmethod
    def sample_position(self, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
        ...

    def density(self, q) -> np.ndarray:
        with np.errstate(under="ignore"):
            return np.exp(self.log_density(q))

    def fock_amplitudes(self, dim: int) -> np.ndarray:
        """Number-basis coefficients (used by the oracle)."""
        from .errors import OracleUnsupportedError
        raise OracleUnsupportedError(f"{type(self).__name__} has no number-basis representation")


def _as_points(q, modes: int) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.ndim == 0 or q.shape[-1] != modes:
        raise ValueError(f"expected points with trailing dimension {modes}, got shape {q.shape}")
    return q


def sample_position(state: StateModel, rng: np.random.Generator, size: Optional[int] = None):
    return state.sample_position(rng, size)


# ---------------------------------------------------------------------------
# Hermite functions

def hermite_functions(nmax: int, x: np.ndarray) -> np.ndarray:
    """Normalized Hermite functions ``h_0..h_nmax`` at ``x`` (stable recurrence).

    Returns an array of shape ``(nmax + 1,) + x.shape``.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty((nmax + 1,) + x.shape)
    out[0] = np.pi ** -0.25 * np.exp(-0.5 * x * x)
    if nmax >= 1:
        out[1] = math.sqrt(2.0) * x * out[0]
    for n in range(1, nmax):
        out[n + 1] = math.sqrt(2.0 / (n + 1)) * x * out[n] - math.sqrt(n / (n + 1)) * out[n - 1]
    return out


def number_basis_projection(psi: np.ndarray, grid: np.ndarray, dim: int, hbar: float,
                            weights: Optional[np.ndarray] = None) -> np.ndarray:
    """Project a sampled wave function onto the first ``dim`` number states.

    Quadrature uses trapezoid weights on ``grid`` unless ``weights`` is given.
    """
    grid = np.asarray(grid, dtype=float)
    if weights is None:
        weights = np.full(grid.shape, grid[1] - grid[0])
        weights[0] *= 0.5
        weights[-1] *= 0.5
    scale = math.sqrt(hbar)
    basis = hermite_functions(dim - 1, grid / scale) / math.sqrt(scale)
    return basis @ (weights * np.asarray(psi, dtype=complex))


# ---------------------------------------------------------------------------
# Gaussian states

class GaussianPureState(StateModel):
    """Pure Gaussian state.

    ``rho`` is normal with mean ``mean_q`` and precision matrix ``gamma``
    (so ``Cov q = inv(gamma)``); the phase is
    ``S = 1/2 d^T phase_matrix d + mean_p . d`` with ``d = q - mean_q``.
    Both gradients are affine in ``q``.
    """

    def __init__(self, mean_q, mean_p, gamma, phase_matrix=None, hbar: float = 1.0):
        self.hbar = float(HbarConfig(hbar).hbar)
        self.mean_q = np.atleast_1d(np.asarray(mean_q, dtype=float))
        self.modes = self.mean_q.shape[0]
        self.mean_p = np.atleast_1d(np.asarray(mean_p, dtype=float))
        self.gamma = np.atleast_2d(np.asarray(gamma, dtype=float))
        n = self.modes
        if phase_matrix is None:
            phase_matrix = np.zeros((n, n))
        self.phase_matrix = np.atleast_2d(np.asarray(phase_matrix, dtype=float))
        if self.mean_p.shape != (n,) or self.gamma.shape != (n, n) or self.phase_matrix.shape != (n, n):
            raise InvalidStateError("inconsistent Gaussian parameter shapes")
        if not np.allclose(self.gamma, self.gamma.T, atol=1e-12):
            raise InvalidStateError("gamma must be symmetric")
        if not np.allclose(self.phase_matrix, self.phase_matrix.T, atol=1e-12):
            raise InvalidStateError("phase_matrix must be symmetric")
        try:
            self._gamma_chol = linalg.cholesky(self.gamma, lower=True)
        except linalg.LinAlgError as exc:
            raise InvalidStateError("gamma must be positive definite") from exc
        self.cov_q = linalg.cho_solve((self._gamma_chol, True), np.eye(n))
        self.cov_q = 0.5 * (self.cov_q + self.cov_q.T)
        self._cov_chol = linalg.cholesky(self.cov_q, lower=True)
        logdet_gamma = 2.0 * np.sum(np.log(np.diag(self._gamma_chol)))
        self._log_norm = 0.5 * logdet_gamma - 0.5 * n * math.log(2 * math.pi)

    def log_density(self, q):
        d = _as_points(q, self.modes) - self.mean_q
        return self._log_norm - 0.5 * np.einsum("...i,ij,...j->...", d, self.gamma, d)

    def grad_log_density(self, q):
        d = _as_points(q, self.modes) - self.mean_q
        return -d @ self.gamma

    def phase_gradient(self, q):
        d = _as_points(q, self.modes) - self.mean_q
        return self.mean_p + d @ self.phase_matrix

    def phase(self, q):
        d = _as_points(q, self.modes) - self.mean_q
        return 0.5 * np.einsum("...i,ij,...j->...", d, self.phase_matrix, d) + d @ self.mean_p

    def wavefunction(self, q):
        with np.errstate(under="ignore"):
            return np.exp(0.5 * self.log_density(q) + 1j * self.phase(q) / self.hbar)

    def sample_position(self, rng, size=None):
        shape = (self.modes,) if size is None else (size, self.modes)
        z = rng.standard_normal(shape)
        return self.mean_q + z @ self._cov_chol.T

    def cdf(self, x):
        if self.modes != 1:
            raise ValueError("cdf is only defined for single-mode states")
        return stats.norm.cdf(x, loc=self.mean_q[0], scale=math.sqrt(self.cov_q[0, 0]))

    # quantum moments, ordering (q_0..q_{N-1}, p_0..p_{N-1})
    def mean_vector(self) -> np.ndarray:
        return np.concatenate([self.mean_q, self.mean_p])

    def covariance(self) -> np.ndarray:
        """Symmetrized quantum covariance matrix of the quadratures."""
        cq = self.cov_q
        cqp = cq @ self.phase_matrix
        cpp = self.phase_matrix @ cq @ self.phase_matrix + 0.25 * self.hbar ** 2 * self.gamma
        return np.block([[cq, cqp], [cqp.T, cpp]])

    def probe_range(self):
        s = math.sqrt(self.cov_q[0, 0])
        return self.mean_q[0] - 14 * s, self.mean_q[0] + 14 * s

    def fock_amplitudes(self, dim):
        n = self.modes
        if (not self.mean_q.any() and not self.mean_p.any() and not self.phase_matrix.any()
                and np.array_equal(self.gamma, (2.0 / self.hbar) * np.eye(n))):
            out = np.zeros(dim ** n, dtype=complex)
            out[0] = 1.0
            return out
        if n != 1:
            off = ~np.eye(n, dtype=bool)
            if self.gamma[off].any() or self.phase_matrix[off].any():
                from .errors import OracleUnsupportedError
                raise OracleUnsupportedError("correlated multimode Gaussian states have no number-basis routine")
            vec = np.ones(1, dtype=complex)
            for k in range(n):
                f = GaussianPureState([self.mean_q[k]], [self.mean_p[k]], [[self.gamma[k, k]]],
                                      [[self.phase_matrix[k, k]]], hbar=self.hbar)
                vec = np.kron(vec, f.fock_amplitudes(dim))
            return vec
        lo, hi = self.probe_range()
        span = math.sqrt(2 * dim + 1) * math.sqrt(self.hbar) + 6 * math.sqrt(self.hbar)
        lo, hi = min(lo, -span), max(hi, span)
        grid = np.linspace(lo, hi, 8001)
        psi = self.wavefunction(grid[:, None])
        return number_basis_projection(psi, grid, dim, self.hbar)


def vacuum_state(modes: int = 1, hbar: float = 1.0) -> GaussianPureState:
    return GaussianPureState(np.zeros(modes), np.zeros(modes), (2.0 / hbar) * np.eye(modes), hbar=hbar)


def _alpha_quadratures(alpha: complex, hbar: float):
    s = math.sqrt(2.0 * hbar)
    return s * alpha.real, s * alpha.imag


class CoherentState(GaussianPureState):
    def __init__(self, alpha: complex, hbar: float = 1.0):
        self.alpha = complex(alpha)
        qa, pa = _alpha_quadratures(self.alpha, hbar)
        super().__init__([qa], [pa], [[2.0 / hbar]], hbar=hbar)

    def fock_amplitudes(self, dim):
        n = np.arange(dim)
        logmag = -0.5 * abs(self.alpha) ** 2 - 0.5 * special.gammaln(n + 1)
        if self.alpha == 0:
            out = np.zeros(dim, dtype=complex)
            out[0] = 1.0
            return out
        # match the global phase of ``wavefunction`` (S vanishes at the mean position)
        qa, pa = _alpha_quadratures(self.alpha, self.hbar)
        return np.exp(logmag - 0.5j * qa * pa / self.hbar) * self.alpha ** n


class SqueezedState(GaussianPureState):
    """Squeezed (optionally displaced) state; ``r > 0`` squeezes ``q``."""

    def __init__(self, r: float, alpha: complex = 0.0, hbar: float = 1.0):
        self.r = float(r)
        self.alpha = complex(alpha)
        qa, pa = _alpha_quadratures(self.alpha, hbar)
        super().__init__([qa], [pa], [[2.0 * math.exp(2 * self.r) / hbar]], hbar=hbar)

    def fock_amplitudes(self, dim):
        if self.alpha != 0:
            return super().fock_amplitudes(dim)
        out = np.zeros(dim, dtype=complex)
        t = math.tanh(self.r)
        for k in range(0, (dim + 1) // 2):
            n = 2 * k
            if n >= dim:
                break
            logc = 0.5 * special.gammaln(n + 1) - k * math.log(2) - special.gammaln(k + 1)
            out[n] = (-t) ** k * math.exp(logc) / math.sqrt(math.cosh(self.r))
        return out


# ---------------------------------------------------------------------------
# single-mode states with a closed-form (or interpolated) wave function

class _CellSampler:
    """Exact-shape sampler for a 1D density on ``[lo, hi]``.

    Cells are chosen by tabulated mass; the position inside a cell is drawn
    by rejection against the true density, so nodes keep zero probability.
    """

    def __init__(self, density, lo: float, hi: float, cells: int = 1 << 14):
        self.density = density
        self.lo, self.hi = float(lo), float(hi)
        self.cells = cells
        self.h = (self.hi - self.lo) / cells
        sub = np.linspace(self.lo, self.hi, 4 * cells + 1)
        vals = density(sub).reshape(-1)
        blocks = np.lib.stride_tricks.sliding_window_view(vals, 5)[::4]
        # composite Simpson on each cell
        mass = (self.h / 12.0) * (blocks[:, 0] + 4 * blocks[:, 1] + 2 * blocks[:, 2]
                                  + 4 * blocks[:, 3] + blocks[:, 4])
        self.total_mass = float(mass.sum())
        if not self.total_mass > 0:
            raise InvalidStateError("density has zero mass on its support")
        self.cell_cdf = np.concatenate([[0.0], np.cumsum(mass) / self.total_mass])
        self.cell_cdf[-1] = 1.0
        self.envelope = 1.25 * blocks.max(axis=1) + 1e-300

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        out = np.empty(size)
        todo = np.arange(size)
        while todo.size:
            u = rng.random(todo.size)
            cell = np.clip(np.searchsorted(self.cell_cdf, u, side="right") - 1, 0, self.cells - 1)
            x = self.lo + (cell + rng.random(todo.size)) * self.h
            ok = rng.random(todo.size) * self.envelope[cell] < self.density(x).reshape(-1)
            out[todo[ok]] = x[ok]
            todo = todo[~ok]
        return out

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        pos = np.clip((x - self.lo) / self.h, 0, self.cells)
        i = np.minimum(np.floor(pos).astype(int), self.cells - 1)
        frac = pos - i
        return self.cell_cdf[i] + frac * (self.cell_cdf[i + 1] - self.cell_cdf[i])


class WaveFunction1D(StateModel):
    """Single-mode state defined by ``psi(x)`` and ``psi'(x)`` on scalars arrays."""

    modes = 1

    @abstractmethod
    def psi(self, x: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def dpsi(self, x: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def probe_range(self) -> tuple[float, float]:
        ...

    @property
    def _sampler(self) -> _CellSampler:
        s = self.__dict__.get("_sampler_cache")
        if s is None:
            lo, hi = self.probe_range()
            s = _CellSampler(lambda x: np.abs(self.psi(x)) ** 2, lo, hi)
            self.__dict__["_sampler_cache"] = s
        return s

    def _x(self, q):
        return _as_points(q, 1)[..., 0]

    def log_density(self, q):
        with np.errstate(divide="ignore", under="ignore"):
            return np.log(np.abs(self.psi(self._x(q))) ** 2)

    def grad_log_density(self, q):
        x = self._x(q)
        psi, d = self.psi(x), self.dpsi(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            g = 2.0 * np.real(np.conj(psi) * d) / np.abs(psi) ** 2
        return g[..., None]

    def phase_gradient(self, q):
        x = self._x(q)
        psi, d = self.psi(x), self.dpsi(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            g = self.hbar * np.imag(np.conj(psi) * d) / np.abs(psi) ** 2
        return g[..., None]

    def wavefunction(self, q):
        return self.psi(self._x(q))

    def sample_position(self, rng, size=None):
        x = self._sampler.sample(rng, 1 if size is None else size)
        return x.reshape(1) if size is None else x[:, None]

    def cdf(self, x):
        return self._sampler.cdf(x)

    def fock_amplitudes(self, dim):
        lo, hi = self.probe_range()
        span = math.sqrt(2 * dim + 1) * math.sqrt(self.hbar) + 6 * math.sqrt(self.hbar)
        grid = np.linspace(min(lo, -span), max(hi, span), 8001)
        return number_basis_projection(self.psi(grid), grid, dim, self.hbar)


class FockState(WaveFunction1D):
    """Number state ``n`` of an oscillator with frequency ``omega`` (unit mass)."""

    def __init__(self, n: int, omega: float = 1.0, hbar: float = 1.0):
        if int(n) != n or n < 0:
            raise InvalidStateError(f"Fock index must be a nonnegative integer, got {n}")
        if not omega > 0:
            raise InvalidStateError("omega must be positive")
        self.n = int(n)
        self.omega = float(omega)
        self.hbar = HbarConfig(hbar).hbar
        self.length = math.sqrt(self.hbar / self.omega)

    def psi(self, x):
        h = hermite_functions(self.n, np.asarray(x, dtype=float) / self.length)
        return h[self.n] / math.sqrt(self.length) + 0j

    def dpsi(self, x):
        n, ell = self.n, self.length
        h = hermite_functions(n + 1, np.asarray(x, dtype=float) / ell)
        d = -math.sqrt((n + 1) / 2.0) * h[n + 1]
        if n >= 1:
            d = d + math.sqrt(n / 2.0) * h[n - 1]
        return d / ell ** 1.5 + 0j

    def probe_range(self):
        half = (math.sqrt(2 * self.n + 1) + 12.0) * self.length
        return -half, half

    def fock_amplitudes(self, dim):
        if self.omega != 1.0:
            return super().fock_amplitudes(dim)
        out = np.zeros(dim, dtype=complex)
        if self.n < dim:
            out[self.n] = 1.0
        return out


class CatState(WaveFunction1D):
    """Superposition ``N (|alpha> + sign |-alpha>)`` of coherent states."""

    def __init__(self, alpha: complex, relative_sign: int = 1, hbar: float = 1.0):
        if relative_sign not in (1, -1):
            raise InvalidStateError("relative_sign must be +1 or -1")
        self.alpha = complex(alpha)
        self.relative_sign = int(relative_sign)
        self.hbar = HbarConfig(hbar).hbar
        overlap = math.exp(-2 * abs(self.alpha) ** 2)
        denom = 2.0 * (1.0 + self.relative_sign * overlap)
        if denom <= 1e-300:
            raise InvalidStateError("odd cat with alpha = 0 is the zero vector")
        self.normalization = 1.0 / math.sqrt(denom)
        self._qa, self._pa = _alpha_quadratures(self.alpha, self.hbar)

    def _coherent(self, x, qa, pa):
        hb = self.hbar
        return (math.pi * hb) ** -0.25 * np.exp(-(x - qa) ** 2 / (2 * hb) + 1j * pa * x / hb
                                                 - 0.5j * qa * pa / hb)

    def psi(self, x):
        x = np.asarray(x, dtype=float)
        a = self._coherent(x, self._qa, self._pa)
        b = self._coherent(x, -self._qa, -self._pa)
        return self.normalization * (a + self.relative_sign * b)

    def dpsi(self, x):
        x = np.asarray(x, dtype=float)
        hb = self.hbar
        a = self._coherent(x, self._qa, self._pa) * (-(x - self._qa) / hb + 1j * self._pa / hb)
        b = self._coherent(x, -self._qa, -self._pa) * (-(x + self._qa) / hb - 1j * self._pa / hb)
        return self.normalization * (a + self.relative_sign * b)

    def probe_range(self):
        half = abs(self._qa) + 12.0 * math.sqrt(self.hbar)
        return -half, half

    def fock_amplitudes(self, dim):
        n = np.arange(dim)
        if self.alpha == 0:
            coh = (n == 0).astype(complex)
        else:
            coh = np.exp(-0.5 * abs(self.alpha) ** 2 - 0.5 * special.gammaln(n + 1)) * self.alpha ** n
        return self.normalization * coh * (1 + self.relative_sign * (-1.0) ** n)


def amplitude_phase_from_grid(psi_values, grid, hbar: float = 1.0):
    """Density and unwrapped phase of a wave function tabulated on a uniform grid.

    The phase is unwrapped left to right; jumps of ``pi * hbar`` survive at
    sign changes of ``psi``.
    """
    psi = np.asarray(psi_values, dtype=complex)
    grid = np.asarray(grid, dtype=float)
    if psi.shape != grid.shape or grid.ndim != 1 or grid.size < 3:
        raise InvalidStateError("psi_values and grid must be 1D arrays of equal length >= 3")
    steps = np.diff(grid)
    if not np.allclose(steps, steps[0], rtol=1e-9, atol=0) or steps[0] <= 0:
        raise InvalidStateError("grid must be uniform and increasing")
    rho = np.abs(psi) ** 2
    norm = np.trapezoid(rho, grid)
    if not norm > 0:
        raise InvalidStateError("wave function has zero norm")
    return rho / norm, hbar * np.unwrap(np.angle(psi))


class GridState1D(WaveFunction1D):
    """Wave function tabulated on a uniform grid, interpolated by cubic splines."""

    def __init__(self, q_min: float, q_max: float, psi_values, hbar: float = 1.0):
        self.hbar = HbarConfig(hbar).hbar
        psi = np.asarray(psi_values, dtype=complex)
        if psi.ndim != 1 or psi.size < 4:
            raise InvalidStateError("psi_values must be a 1D array with at least 4 points")
        if not q_max > q_min:
            raise InvalidStateError("q_max must exceed q_min")
        self.grid = np.linspace(q_min, q_max, psi.size)
        self.q_min, self.q_max = float(q_min), float(q_max)
        raw_norm = float(np.trapezoid(np.abs(psi) ** 2, self.grid))
        if not raw_norm > 0:
            raise InvalidStateError("wave function has zero norm")
        self.input_norm_deviation = abs(raw_norm - 1.0)
        self.renormalized = self.input_norm_deviation > 1e-6
        self.psi_values = psi / math.sqrt(raw_norm)
        self.rho, self.S_unwrapped = amplitude_phase_from_grid(self.psi_values, self.grid, self.hbar)
        self.cdf_table = np.concatenate(
            [[0.0], np.cumsum(0.5 * (self.rho[1:] + self.rho[:-1]) * np.diff(self.grid))])
        self._re = CubicSpline(self.grid, self.psi_values.real)
        self._im = CubicSpline(self.grid, self.psi_values.imag)

    @classmethod
    def from_csv(cls, path, hbar: float = 1.0) -> "GridState1D":
        data = np.loadtxt(path, delimiter=",", ndmin=2, comments="#")
        if data.shape[1] not in (2, 3):
            raise InvalidStateError("grid CSV needs columns q, Re psi[, Im psi]")
        q = data[:, 0]
        im = data[:, 2] if data.shape[1] == 3 else np.zeros_like(q)
        steps = np.diff(q)
        if not np.allclose(steps, steps[0], rtol=1e-6):
            raise InvalidStateError("grid CSV positions must be uniformly spaced")
        return cls(q[0], q[-1], data[:, 1] + 1j * im, hbar=hbar)

    def _inside(self, x):
        return (x >= self.q_min) & (x <= self.q_max)

    def psi(self, x):
        x = np.asarray(x, dtype=float)
        v = self._re(x) + 1j * self._im(x)
        return np.where(self._inside(x), v, 0.0)

    def dpsi(self, x):
        x = np.asarray(x, dtype=float)
        v = self._re(x, 1) + 1j * self._im(x, 1)
        return np.where(self._inside(x), v, 0.0)

    def probe_range(self):
        return self.q_min, self.q_max

    def fock_amplitudes(self, dim):
        return number_basis_projection(self.psi_values, self.grid, dim, self.hbar)


# ---------------------------------------------------------------------------
# composites

class ProductState(StateModel):
    def __init__(self, factors: Sequence[StateModel]):
        if not factors:
            raise InvalidStateError("product state needs at least one factor")
        hbars = {f.hbar for f in factors}
        if len(hbars) != 1:
            raise InvalidStateError("all factors must share hbar")
        if any(isinstance(f, MixtureState) for f in factors):
            raise InvalidStateError("product factors must be pure states")
        self.factors = list(factors)
        self.hbar = hbars.pop()
        self.modes = sum(f.modes for f in self.factors)
        edges = np.cumsum([0] + [f.modes for f in self.factors])
        self._slices = [slice(a, b) for a, b in zip(edges[:-1], edges[1:])]

    def log_density(self, q):
        q = _as_points(q, self.modes)
        return sum(f.log_density(q[..., s]) for f, s in zip(self.factors, self._slices))

    def grad_log_density(self, q):
        q = _as_points(q, self.modes)
        return np.concatenate([f.grad_log_density(q[..., s]) for f, s in zip(self.factors, self._slices)],
                              axis=-1)

    def phase_gradient(self, q):
        q = _as_points(q, self.modes)
        return np.concatenate([f.phase_gradient(q[..., s]) for f, s in zip(self.factors, self._slices)],
                              axis=-1)

    def sample_position(self, rng, size=None):
        return np.concatenate([f.sample_position(rng, size) for f in self.factors], axis=-1)

    def fock_amplitudes(self, dim):
        vec = np.ones(1, dtype=complex)
        for f in self.factors:
            vec = np.kron(vec, f.fock_amplitudes(dim))
        return vec


class MixtureState(StateModel):
    """Convex combination of pure states.

    Momentum assignment uses the component each sample was drawn from, so
    ``phase_gradient`` is not defined on the mixture itself.
    """

    def __init__(self, weights, components: Sequence[StateModel]):
        w = np.asarray(weights, dtype=float)
        if w.ndim != 1 or w.size != len(components) or w.size == 0:
            raise InvalidStateError("weights and components must have equal nonzero length")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise InvalidStateError("mixture weights must be nonnegative and sum to 1")
        if len({c.modes for c in components}) != 1 or len({c.hbar for c in components}) != 1:
            raise InvalidStateError("mixture components must share mode count and hbar")
        if any(isinstance(c, MixtureState) for c in components):
            raise InvalidStateError("nested mixtures are not supported")
        self.weights = w / w.sum()
        self.components = list(components)
        self.modes = components[0].modes
        self.hbar = components[0].hbar

    def log_density(self, q):
        with np.errstate(divide="ignore", under="ignore"):
            return np.log(self.density(q))

    def density(self, q):
        return sum(w * c.density(q) for w, c in zip(self.weights, self.components))

    def grad_log_density(self, q):
        num = sum(w * c.density(q)[..., None] * c.grad_log_density(q)
                  for w, c in zip(self.weights, self.components))
        with np.errstate(divide="ignore", invalid="ignore"):
            return num / self.density(q)[..., None]

    def phase_gradient(self, q):
        raise NotImplementedError("mixtures assign momentum per component; sample via draw_phase_points")

    def sample_components(self, rng, size):
        return rng.choice(len(self.components), size=size, p=self.weights)

    def sample_position(self, rng, size=None):
        n = 1 if size is None else size
        labels = self.sample_components(rng, n)
        out = np.empty((n, self.modes))
        for k, comp in enumerate(self.components):
            idx = np.flatnonzero(labels == k)
            if idx.size:
                out[idx] = comp.sample_position(rng, idx.size)
        return out[0] if size is None else out

    def cdf(self, x):
        return sum(w * c.cdf(x) for w, c in zip(self.weights, self.components))


# ---------------------------------------------------------------------------
# diagnostics

@dataclass
class StateDiagnostics:
    norm_deviation: float
    node_count: int
    max_abs_grad_log_density: float
    renormalized: bool = False
    input_norm_deviation: float = 0.0
    notes: list = field(default_factory=list)

    def as_dict(self):
        return {
            "norm_deviation": self.norm_deviation,
            "node_count": self.node_count,
            "max_abs_grad_log_density": self.max_abs_grad_log_density,
            "renormalized": self.renormalized,
            "input_norm_deviation": self.input_norm_deviation,
            "notes": list(self.notes),
        }


def _diagnose_1d(state, points: int = 40001) -> StateDiagnostics:
    lo, hi = state.probe_range()
    grid = np.linspace(lo, hi, points)
    rho = state.density(grid[:, None])
    norm_dev = abs(np.trapezoid(rho, grid) - 1.0)
    peak = rho.max()
    inner = rho[1:-1]
    is_min = (inner <= rho[:-2]) & (inner < rho[2:]) & (inner < 1e-3 * peak)
    # a true zero flips the phase of psi by ~pi across the minimum; a deep
    # but nonzero dip (e.g. between the lobes of an even cat) does not
    psi = state.wavefunction(grid[:, None])
    flip = np.abs(np.angle(psi[2:] * np.conj(psi[:-2]))) > 0.5 * np.pi
    is_min &= flip
    nodes = int(is_min.sum())
    mask = rho > 1e-12 * peak
    g = np.abs(state.grad_log_density(grid[mask][:, None])[..., 0])
    return StateDiagnostics(norm_dev, nodes, float(g.max()) if g.size else 0.0)


def validate_state(state: StateModel) -> StateDiagnostics:
    """Norm deviation, density nodes, and largest ``|d rho / rho|`` on a probe grid."""
    if isinstance(state, MixtureState):
        parts = [validate_state(c) for c in state.components]
        d = StateDiagnostics(max(p.norm_deviation for p in parts),
                             sum(p.node_count for p in parts),
                             max(p.max_abs_grad_log_density for p in parts),
                             any(p.renormalized for p in parts),
                             max(p.input_norm_deviation for p in parts))
        d.notes.append("mixture: aggregated over components")
        return d
    if isinstance(state, ProductState):
        parts = [validate_state(f) for f in state.factors]
        return StateDiagnostics(max(p.norm_deviation for p in parts),
                                sum(p.node_count for p in parts),
                                max(p.max_abs_grad_log_density for p in parts),
                                any(p.renormalized for p in parts),
                                max(p.input_norm_deviation for p in parts))
    if isinstance(state, GaussianPureState):
        if state.modes == 1:
            return _diagnose_1d(state)
        # normalized by construction; probe along the principal axes only
        d = StateDiagnostics(0.0, 0, float(np.sqrt(np.linalg.eigvalsh(state.gamma).max()) * 14))
        d.notes.append("multimode Gaussian: analytic normalization")
        return d
    if isinstance(state, WaveFunction1D):
        d = _diagnose_1d(state)
        if isinstance(state, GridState1D):
            d.renormalized = state.renormalized
            d.input_norm_deviation = state.input_norm_deviation
        return d
    raise InvalidStateError(f"cannot validate {type(state).__name__}")
