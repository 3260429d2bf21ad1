"""Phase-space sampling under the epistemic restriction.

A phase point is drawn by sampling ``q ~ rho`` and ``xi ~ chi`` and then
fixing the momentum deterministically::

    p = dS(q) + (xi / 2) * d rho(q) / rho(q)
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .errors import NodeProximityError, PersistentNodeError
from .states import DENSITY_FLOOR, MixtureState, StateModel

DEFAULT_NODE_RETRIES = 16


class XiLaw(str, Enum):
    TWO_POINT = "two_point"
    GAUSSIAN = "gaussian"
    CLASSICAL = "classical"


@dataclass(frozen=True)
class XiDistribution:
    """Law of the global action variable: mean 0, second moment ``hbar**2``.

    ``CLASSICAL`` pins ``xi = 0`` and deliberately breaks the second-moment
    condition; it switches the sampler to the classical Hamilton-Jacobi limit.
    """

    law: XiLaw = XiLaw.TWO_POINT
    hbar: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "law", XiLaw(self.law))
        if not self.hbar > 0:
            raise ValueError("hbar must be positive")

    @property
    def is_classical_limit(self) -> bool:
        return self.law is XiLaw.CLASSICAL

    def moments(self) -> tuple[float, float]:
        if self.is_classical_limit:
            return 0.0, 0.0
        return 0.0, self.hbar ** 2


def draw_xi(dist: XiDistribution, rng: np.random.Generator, size: Optional[int] = None):
    n = 1 if size is None else size
    if dist.law is XiLaw.TWO_POINT:
        xi = np.where(rng.random(n) < 0.5, -dist.hbar, dist.hbar)
    elif dist.law is XiLaw.GAUSSIAN:
        xi = dist.hbar * rng.standard_normal(n)
    else:
        xi = np.zeros(n)
    return float(xi[0]) if size is None else xi


@dataclass
class PhasePoint:
    """One point, or a batch, of ``(q, p, xi)``; ``q`` and ``p`` have shape ``(..., N)``."""

    q: np.ndarray
    p: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        self.p = np.asarray(self.p, dtype=float)
        self.xi = np.asarray(self.xi, dtype=float)
        if self.q.shape != self.p.shape:
            raise ValueError(f"q and p shapes differ: {self.q.shape} vs {self.p.shape}")

    @property
    def modes(self) -> int:
        return self.q.shape[-1]

    def __len__(self):
        return 1 if self.q.ndim == 1 else self.q.shape[0]


@dataclass(frozen=True)
class RngStreamSpec:
    seed: int
    stream_index: int

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_index,))
        return np.random.Generator(np.random.PCG64(ss))


def _momentum(state: StateModel, q, xi):
    xi = np.asarray(xi, dtype=float)
    return state.phase_gradient(q) + 0.5 * xi[..., None] * state.grad_log_density(q)


def assign_momentum(state: StateModel, q, xi) -> np.ndarray:
    """Momentum fixed by the restriction at position ``q`` and action ``xi``.

    Raises ``NodeProximityError`` if the density underflows at any point.
    """
    q = np.asarray(q, dtype=float)
    rho = state.density(q)
    if np.any(~(rho > DENSITY_FLOOR)):
        raise NodeProximityError("density underflow at sampled position; redraw the point")
    return _momentum(state, q, xi)


def _draw_pure(state, dist, rng, n, retries):
    q = state.sample_position(rng, n)
    xi = draw_xi(dist, rng, n)
    bad = ~(state.density(q) > DENSITY_FLOOR)
    for _ in range(retries):
        if not bad.any():
            break
        idx = np.flatnonzero(bad)
        q[idx] = state.sample_position(rng, idx.size)
        bad[idx] = ~(state.density(q[idx]) > DENSITY_FLOOR)
    if bad.any():
        raise PersistentNodeError(
            f"{int(bad.sum())} samples still on density nodes after {retries} redraws")
    if dist.is_classical_limit:
        p = state.phase_gradient(q)
    else:
        p = _momentum(state, q, xi)
    return q, p, xi


def draw_phase_points(state: StateModel, dist: XiDistribution, rng: np.random.Generator,
                      size: int, retries: int = DEFAULT_NODE_RETRIES) -> PhasePoint:
    """Batch of ``size`` phase points from the restricted distribution of ``state``."""
    if isinstance(state, MixtureState):
        labels = state.sample_components(rng, size)
        q = np.empty((size, state.modes))
        p = np.empty((size, state.modes))
        xi = np.empty(size)
        for k, comp in enumerate(state.components):
            idx = np.flatnonzero(labels == k)
            if idx.size:
                q[idx], p[idx], xi[idx] = _draw_pure(comp, dist, rng, idx.size, retries)
        return PhasePoint(q, p, xi)
    return PhasePoint(*_draw_pure(state, dist, rng, size, retries))


def draw_phase_point(state: StateModel, dist: XiDistribution, rng: np.random.Generator,
                     retries: int = DEFAULT_NODE_RETRIES) -> PhasePoint:
    pts = draw_phase_points(state, dist, rng, 1, retries)
    return PhasePoint(pts.q[0], pts.p[0], pts.xi[0])
