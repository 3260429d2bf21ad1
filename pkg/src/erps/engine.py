"""Monte Carlo estimation of expectation values over restricted phase-space samples.

Samples are processed in fixed-size chunks; chunk ``c`` always draws from
RNG stream ``c`` of the run seed, and chunk statistics are merged in chunk
order.  The result is therefore bit-identical for any worker count.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .circuits import Circuit, compose_symbolic
from .errors import NonFiniteSampleError
from .observables import pullback, require_admissible
from .polynomial import DEFAULT_TERM_BUDGET, Polynomial
from .sampling import RngStreamSpec, XiDistribution, XiLaw, draw_phase_points
from .states import StateModel

DEFAULT_CHUNK = 1 << 16
DEFAULT_DELTAS = (0.1, 0.05, 0.01)
DEFAULT_HEAVY_TAIL_THRESHOLD = 100.0
LOW_K_WARNING = 1000


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("ERPS_WORKERS", "1")))
    except ValueError:
        return 1


@dataclass
class EstimationConfig:
    samples: int = 100_000
    seed: int = 0
    workers: int = field(default_factory=default_workers)
    estimator: str = "mean"  # or "median_of_means"
    groups: int = 10
    xi_law: str = "two_point"
    heavy_tail_threshold: float = DEFAULT_HEAVY_TAIL_THRESHOLD
    chunk_size: int = DEFAULT_CHUNK
    deltas: tuple = DEFAULT_DELTAS
    term_budget: int = DEFAULT_TERM_BUDGET
    keep_values: int = 0

    def __post_init__(self):
        if int(self.samples) < 1:
            raise ValueError("samples must be >= 1")
        self.samples = int(self.samples)
        self.xi_law = XiLaw(self.xi_law).value
        if self.estimator not in ("mean", "median_of_means"):
            raise ValueError(f"unknown estimator {self.estimator!r}")
        if self.estimator == "median_of_means":
            if self.groups < 3:
                raise ValueError("median_of_means needs at least 3 groups")
            if self.samples % self.groups:
                raise ValueError("groups must divide the sample count")
        if self.chunk_size < 1 or self.workers < 1:
            raise ValueError("chunk_size and workers must be positive")

    def chunks(self) -> list:
        """``(chunk_index, start, count)`` for the fixed chunk layout."""
        cs = self.chunk_size
        return [(c, s, min(cs, self.samples - s)) for c, s in enumerate(range(0, self.samples, cs))]


@dataclass
class RunManifest:
    config: dict
    code_version: str
    seed: int
    chunks: list

    def as_dict(self):
        return asdict(self)


@dataclass
class EstimateReport:
    estimate: float
    sample_variance: float
    std_error: float
    K: int
    kurtosis_proxy: float
    wall_time_ms: float
    estimator: str = "mean"
    plain_mean: float = float("nan")
    group_means: Optional[list] = None
    heavy_tail: bool = False
    warnings: list = field(default_factory=list)
    deltas: tuple = DEFAULT_DELTAS
    manifest: Optional[RunManifest] = None
    values: Optional[np.ndarray] = field(default=None, repr=False)

    def chebyshev_epsilon_at(self, delta: float) -> float:
        """Half-width ``eps`` at which the Chebyshev bound reaches ``1 - delta``."""
        if not 0 < delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        return math.sqrt(self.sample_variance / (self.K * delta))

    def chebyshev_table(self, deltas: Optional[Sequence[float]] = None) -> list:
        return [{"delta": d, "epsilon": self.chebyshev_epsilon_at(d)} for d in (deltas or self.deltas)]

    def to_dict(self) -> dict:
        out = {
            "estimate": self.estimate,
            "variance": self.sample_variance,
            "std_error": self.std_error,
            "K": self.K,
            "chebyshev": self.chebyshev_table(),
            "kurtosis_proxy": self.kurtosis_proxy,
            "wall_time_ms": self.wall_time_ms,
            "estimator": self.estimator,
            "plain_mean": self.plain_mean,
            "heavy_tail": self.heavy_tail,
            "warnings": list(self.warnings),
            "manifest": self.manifest.as_dict() if self.manifest else None,
        }
        if self.group_means is not None:
            out["group_means"] = list(self.group_means)
        return out


# ---------------------------------------------------------------------------
# moment accumulation

@dataclass
class Moments:
    """Count, mean and central moment sums ``M2..M4`` of a stream of values."""

    n: int = 0
    mean: float = 0.0
    M2: float = 0.0
    M3: float = 0.0
    M4: float = 0.0

    @classmethod
    def of(cls, x: np.ndarray) -> "Moments":
        n = x.size
        if n == 0:
            return cls()
        m = float(x.mean())
        d = x - m
        d2 = d * d
        return cls(n, m, float(d2.sum()), float((d2 * d).sum()), float((d2 * d2).sum()))

    def merge(self, o: "Moments") -> "Moments":
        if o.n == 0:
            return Moments(self.n, self.mean, self.M2, self.M3, self.M4)
        if self.n == 0:
            return Moments(o.n, o.mean, o.M2, o.M3, o.M4)
        na, nb = self.n, o.n
        n = na + nb
        d = o.mean - self.mean
        mean = self.mean + d * nb / n
        M2 = self.M2 + o.M2 + d * d * na * nb / n
        M3 = (self.M3 + o.M3 + d ** 3 * na * nb * (na - nb) / n ** 2
              + 3 * d * (na * o.M2 - nb * self.M2) / n)
        M4 = (self.M4 + o.M4 + d ** 4 * na * nb * (na * na - na * nb + nb * nb) / n ** 3
              + 6 * d * d * (na * na * o.M2 + nb * nb * self.M2) / n ** 2
              + 4 * d * (na * o.M3 - nb * self.M3) / n)
        return Moments(n, mean, M2, M3, M4)

    @property
    def variance(self) -> float:
        return self.M2 / (self.n - 1) if self.n > 1 else 0.0

    @property
    def kurtosis(self) -> float:
        if self.n < 2 or self.M2 == 0:
            return 0.0
        return self.n * self.M4 / (self.M2 * self.M2)


# ---------------------------------------------------------------------------

def check_configuration(circuit: Circuit, observables: Sequence[Polynomial],
                        term_budget: int = DEFAULT_TERM_BUDGET) -> list:
    """Pull every observable back through the circuit; raise if any is inadmissible."""
    sym = compose_symbolic(circuit, term_budget)
    pulled = []
    for obs in observables:
        pb = pullback(obs, sym)
        require_admissible(pb)
        pulled.append(pb)
    return pulled


def _xi(state: StateModel, config: EstimationConfig) -> XiDistribution:
    return XiDistribution(config.xi_law, state.hbar)


def _chunk_values(state, circuit, observables, xi, seed, chunk):
    index, start, count = chunk
    rng = RngStreamSpec(seed, index).generator()
    pts = draw_phase_points(state, xi, rng, count)
    q, p = circuit.evolve(pts.q, pts.p)
    vals = np.stack([o.evaluate(q, p) for o in observables])
    if not np.all(np.isfinite(vals)):
        bad = int(np.count_nonzero(~np.isfinite(vals)))
        raise NonFiniteSampleError(f"{bad} non-finite observable values in chunk {index}")
    return vals


def _run_chunks(fn, chunks, workers):
    if workers <= 1 or len(chunks) <= 1:
        return [fn(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, chunks))


def _manifest(config: EstimationConfig, extra: Optional[dict]) -> RunManifest:
    from . import __version__
    cfg = {k: v for k, v in asdict(config).items() if k != "workers"}
    cfg["deltas"] = list(config.deltas)
    if extra:
        cfg["run"] = extra
    return RunManifest(cfg, __version__, config.seed,
                       [[c, s, n, c] for c, s, n in config.chunks()])


def run_estimates(state: StateModel, circuit: Circuit, observables: Sequence[Polynomial],
                  config: EstimationConfig, manifest_extra: Optional[dict] = None
                  ) -> List[EstimateReport]:
    """Estimate several observables from one shared sample stream."""
    if circuit.modes != state.modes:
        raise ValueError(f"circuit acts on {circuit.modes} modes, state has {state.modes}")
    for o in observables:
        if o.modes != state.modes:
            raise ValueError(f"observable acts on {o.modes} modes, state has {state.modes}")
    check_configuration(circuit, observables, config.term_budget)

    t0 = time.perf_counter()
    xi = _xi(state, config)
    K = config.samples
    mom = config.estimator == "median_of_means"
    group_size = K // config.groups if mom else 0
    nobs = len(observables)
    keep = config.keep_values

    def work(chunk):
        vals = _chunk_values(state, circuit, observables, xi, config.seed, chunk)
        stats = [Moments.of(v) for v in vals]
        gsums = None
        if mom:
            gid = (chunk[1] + np.arange(chunk[2])) // group_size
            gsums = np.stack([np.bincount(gid, weights=v, minlength=config.groups) for v in vals])
        kept = vals[:, :max(0, keep - chunk[1])] if keep > chunk[1] else None
        return stats, gsums, kept

    results = _run_chunks(work, config.chunks(), config.workers)

    totals = [Moments() for _ in range(nobs)]
    gsum = np.zeros((nobs, config.groups)) if mom else None
    kept = []
    for stats, gs, kv in results:
        totals = [t.merge(s) for t, s in zip(totals, stats)]
        if mom:
            gsum += gs
        if kv is not None:
            kept.append(kv)
    wall = 1000.0 * (time.perf_counter() - t0)
    manifest = _manifest(config, manifest_extra)
    kept_vals = np.concatenate(kept, axis=1)[:, :keep] if kept else None

    reports = []
    for i, t in enumerate(totals):
        var = t.variance
        kurt = t.kurtosis
        warnings = []
        heavy = kurt > config.heavy_tail_threshold
        if heavy:
            warnings.append(f"heavy-tail: kurtosis proxy {kurt:.3g} exceeds {config.heavy_tail_threshold:g}; "
                            "standard error and Chebyshev bound may be unreliable")
        if K < LOW_K_WARNING:
            warnings.append(f"low sample count K={K}")
        if xi.is_classical_limit:
            warnings.append("classical-limit xi law: results are the classical ensemble average")
        estimate = t.mean
        gm = None
        if mom:
            gm = (gsum[i] / group_size).tolist()
            estimate = float(np.median(gsum[i] / group_size))
        reports.append(EstimateReport(
            estimate=float(estimate), sample_variance=float(var), std_error=math.sqrt(var / K),
            K=K, kurtosis_proxy=float(kurt), wall_time_ms=wall, estimator=config.estimator,
            plain_mean=float(t.mean), group_means=gm, heavy_tail=heavy, warnings=warnings,
            deltas=tuple(config.deltas), manifest=manifest,
            values=None if kept_vals is None else kept_vals[i]))
    return reports


def run_estimate(state: StateModel, circuit: Circuit, obs: Polynomial, config: EstimationConfig,
                 manifest_extra: Optional[dict] = None) -> EstimateReport:
    return run_estimates(state, circuit, [obs], config, manifest_extra)[0]


@dataclass
class VarianceEstimate:
    variance: float
    kurtosis_proxy: float
    heavy_tail: bool
    K: int


def estimate_variance(state: StateModel, circuit: Circuit, obs: Polynomial, pilot_K: int = 10_000,
                      config: Optional[EstimationConfig] = None) -> VarianceEstimate:
    """Pilot-run sample variance and kurtosis proxy of the evaluated observable."""
    base = config or EstimationConfig()
    cfg = EstimationConfig(**{**asdict(base), "samples": pilot_K, "estimator": "mean",
                              "keep_values": 0})
    rep = run_estimate(state, circuit, obs, cfg)
    return VarianceEstimate(rep.sample_variance, rep.kurtosis_proxy, rep.heavy_tail, pilot_K)


def plan_samples(epsilon: float, delta: float, variance_estimate: float) -> int:
    """Sample count at which Chebyshev guarantees ``|error| <= epsilon`` w.p. ``>= 1 - delta``."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if variance_estimate < 0:
        raise ValueError("variance must be nonnegative")
    k = variance_estimate / (epsilon * epsilon * delta)
    # absorb floating-point noise in the division before rounding up
    return max(1, math.ceil(k * (1 - 1e-12)))


def chebyshev_bound(report: EstimateReport, epsilon: float) -> float:
    """Lower bound on ``P(|mean - truth| <= epsilon)``."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    return max(0.0, 1.0 - report.sample_variance / (report.K * epsilon * epsilon))


# ---------------------------------------------------------------------------
# phase-space moments (mean vector and covariance of the evolved quadratures)

@dataclass
class MomentEstimate:
    mean: np.ndarray
    mean_se: np.ndarray
    cov: np.ndarray
    cov_se: np.ndarray
    K: int


def estimate_moments(state: StateModel, circuit: Circuit, config: EstimationConfig) -> MomentEstimate:
    """Sample mean and covariance of ``(q_T, p_T)`` with per-entry standard errors.

    Two passes over the same deterministic chunk streams: the first fixes the
    mean, the second accumulates centered products and their squares.
    """
    xi = _xi(state, config)
    chunks = config.chunks()

    def evolve(chunk):
        rng = RngStreamSpec(config.seed, chunk[0]).generator()
        pts = draw_phase_points(state, xi, rng, chunk[2])
        q, p = circuit.evolve(pts.q, pts.p)
        return np.concatenate([q, p], axis=1)

    sums = _run_chunks(lambda c: evolve(c).sum(axis=0), chunks, config.workers)
    K = config.samples
    mean = np.sum(sums, axis=0) / K

    def second(c):
        x = evolve(c) - mean
        y = x[:, :, None] * x[:, None, :]
        return (x * x).sum(axis=0), y.sum(axis=0), (y * y).sum(axis=0)

    parts = _run_chunks(second, chunks, config.workers)
    s2 = sum(p[0] for p in parts)
    sy = sum(p[1] for p in parts)
    syy = sum(p[2] for p in parts)
    var = s2 / (K - 1)
    cov = sy / (K - 1)
    ey = sy / K
    cov_se = np.sqrt(np.maximum(syy / K - ey * ey, 0.0) / K)
    return MomentEstimate(mean, np.sqrt(var / K), cov, cov_se, K)
