"""Run-config schema (JSON) and builders for library objects."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Annotated, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, ValidationError

from . import circuits as C
from .engine import DEFAULT_CHUNK, EstimationConfig, default_workers
from .errors import ConfigError
from .observables import observable_from_terms
from .polynomial import DEFAULT_TERM_BUDGET
from . import states as S

Complexish = Union[float, List[float]]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


def _complex(v: Complexish) -> complex:
    if isinstance(v, (int, float)):
        return complex(v)
    if len(v) != 2:
        raise ConfigError("complex values are given as a number or [re, im]")
    return complex(v[0], v[1])


class VacuumSpec(_Strict):
    type: Literal["vacuum"]
    modes: PositiveInt = 1


class GaussianSpec(_Strict):
    type: Literal["gaussian"]
    mean_q: List[float]
    mean_p: List[float]
    gamma: List[List[float]]
    phase_matrix: Optional[List[List[float]]] = None


class FockSpec(_Strict):
    type: Literal["fock"]
    n: Annotated[int, Field(ge=0)]
    omega: PositiveFloat = 1.0


class CoherentSpec(_Strict):
    type: Literal["coherent"]
    alpha: Complexish


class SqueezedSpec(_Strict):
    type: Literal["squeezed"]
    r: float
    alpha: Complexish = 0.0


class CatSpec(_Strict):
    type: Literal["cat"]
    alpha: Complexish
    relative_sign: Literal[1, -1] = 1


class GridSpec(_Strict):
    type: Literal["grid"]
    q_min: Optional[float] = None
    q_max: Optional[float] = None
    psi_re: Optional[List[float]] = None
    psi_im: Optional[List[float]] = None
    csv: Optional[str] = None


class ProductSpec(_Strict):
    type: Literal["product"]
    factors: List["StateSpec"] = Field(min_length=1)


class MixtureSpec(_Strict):
    type: Literal["mixture"]
    weights: List[float]
    components: List["StateSpec"] = Field(min_length=1)


StateSpec = Annotated[
    Union[VacuumSpec, GaussianSpec, FockSpec, CoherentSpec, SqueezedSpec, CatSpec, GridSpec,
          ProductSpec, MixtureSpec],
    Field(discriminator="type"),
]
ProductSpec.model_rebuild()
MixtureSpec.model_rebuild()


class TermSpec(_Strict):
    c: float
    q: List[Annotated[int, Field(ge=0)]]
    p: List[Annotated[int, Field(ge=0)]]


class GateSpec(BaseModel):
    model_config = ConfigDict(extra="allow")
    gate: str


class XiSpec(_Strict):
    law: Literal["two_point", "gaussian", "classical"] = "two_point"


class EstimationSpec(_Strict):
    samples: PositiveInt = 100_000
    seed: Annotated[int, Field(ge=0, lt=2 ** 64)] = 0
    estimator: Literal["mean", "median_of_means"] = "mean"
    groups: Annotated[int, Field(ge=3)] = 10
    workers: Optional[PositiveInt] = None
    heavy_tail_threshold: PositiveFloat = 100.0
    chunk_size: PositiveInt = DEFAULT_CHUNK
    deltas: List[Annotated[float, Field(gt=0, lt=1)]] = [0.1, 0.05, 0.01]
    term_budget: PositiveInt = DEFAULT_TERM_BUDGET


class OracleSpec(_Strict):
    levels: Optional[Annotated[int, Field(ge=2)]] = None
    sweep: Optional[List[Annotated[int, Field(ge=2)]]] = None


class OutputSpec(_Strict):
    path: Optional[str] = None
    histogram_bins: Optional[PositiveInt] = None
    histogram_path: Optional[str] = None
    samples_csv: Optional[str] = None
    samples_csv_max: PositiveInt = 100_000


class PlanSpec(_Strict):
    epsilon: Optional[PositiveFloat] = None
    delta: Optional[Annotated[float, Field(gt=0, lt=1)]] = None
    pilot_samples: PositiveInt = 10_000


class RunConfig(_Strict):
    hbar: PositiveFloat = 1.0
    state: StateSpec
    circuit: List[GateSpec] = []
    observable: List[TermSpec] = Field(min_length=1)
    xi: XiSpec = XiSpec()
    estimation: EstimationSpec = EstimationSpec()
    oracle: OracleSpec = OracleSpec()
    output: OutputSpec = OutputSpec()
    plan: PlanSpec = PlanSpec()


# ---------------------------------------------------------------------------

def _format_validation(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(x) if not isinstance(x, int) else f"[{x}]" for x in err["loc"])
        lines.append(f"{loc.replace('.[', '[')}: {err['msg']}")
    return "invalid config:\n  " + "\n  ".join(lines)


def parse_config(data: dict) -> RunConfig:
    if isinstance(data, dict) and "manifest" in data and "state" not in data:
        # a report written by a previous run: re-execute its resolved config
        try:
            data = dict(data["manifest"]["config"]["run"])
        except (KeyError, TypeError) as exc:
            raise ConfigError("report manifest does not contain a run config") from exc
        # never overwrite the report being replayed unless asked to via --out
        if isinstance(data.get("output"), dict):
            data["output"] = {**data["output"], "path": None}
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_validation(exc)) from exc


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
    return parse_config(data)


def build_state(spec, hbar: float, where: str = "state", base_dir: Optional[Path] = None):
    try:
        if spec.type == "vacuum":
            return S.vacuum_state(spec.modes, hbar)
        if spec.type == "gaussian":
            return S.GaussianPureState(spec.mean_q, spec.mean_p, spec.gamma, spec.phase_matrix, hbar=hbar)
        if spec.type == "fock":
            return S.FockState(spec.n, spec.omega, hbar=hbar)
        if spec.type == "coherent":
            return S.CoherentState(_complex(spec.alpha), hbar=hbar)
        if spec.type == "squeezed":
            return S.SqueezedState(spec.r, _complex(spec.alpha), hbar=hbar)
        if spec.type == "cat":
            return S.CatState(_complex(spec.alpha), spec.relative_sign, hbar=hbar)
        if spec.type == "grid":
            if spec.csv:
                path = Path(spec.csv)
                if base_dir is not None and not path.is_absolute():
                    path = base_dir / path
                return S.GridState1D.from_csv(path, hbar=hbar)
            if spec.psi_re is None or spec.q_min is None or spec.q_max is None:
                raise ConfigError(f"{where}: grid state needs csv or q_min, q_max, psi_re")
            psi = np.asarray(spec.psi_re, dtype=float) + 0j
            if spec.psi_im is not None:
                if len(spec.psi_im) != len(spec.psi_re):
                    raise ConfigError(f"{where}.psi_im: length differs from psi_re")
                psi = psi + 1j * np.asarray(spec.psi_im, dtype=float)
            return S.GridState1D(spec.q_min, spec.q_max, psi, hbar=hbar)
        if spec.type == "product":
            return S.ProductState([build_state(f, hbar, f"{where}.factors[{i}]", base_dir)
                                   for i, f in enumerate(spec.factors)])
        if spec.type == "mixture":
            return S.MixtureState(spec.weights, [build_state(c, hbar, f"{where}.components[{i}]", base_dir)
                                                 for i, c in enumerate(spec.components)])
    except ConfigError:
        raise
    except (S.InvalidStateError, ValueError, OSError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    raise ConfigError(f"{where}.type: unknown state type {spec.type!r}")


def build_gate(spec: GateSpec, modes: int, where: str, term_budget: int = DEFAULT_TERM_BUDGET):
    params = dict(spec.model_extra or {})
    name = spec.gate
    if name in ("kick", "drift"):
        if "potential" not in params:
            raise ConfigError(f"{where}.potential: field required")
        try:
            params["potential"] = observable_from_terms(params["potential"], modes, term_budget)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{where}.potential: {exc}") from exc
    try:
        gate = C.gate_library(name, params, modes)
    except C.UnknownGateError as exc:
        raise ConfigError(f"{where}.gate: {exc}") from exc
    except (ValueError, TypeError, IndexError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    return gate


class Resolved:
    """Library objects built from a validated config."""

    def __init__(self, cfg: RunConfig, base_dir: Optional[Path] = None):
        self.cfg = cfg
        self.state = build_state(cfg.state, cfg.hbar, base_dir=base_dir)
        n = self.state.modes
        budget = cfg.estimation.term_budget
        self.circuit = C.Circuit(n, tuple(build_gate(g, n, f"circuit[{i}]", budget)
                                          for i, g in enumerate(cfg.circuit)))
        for i, t in enumerate(cfg.observable):
            for side in ("q", "p"):
                if len(getattr(t, side)) != n:
                    raise ConfigError(f"observable[{i}].{side}: exponent array has length "
                                      f"{len(getattr(t, side))}, state has {n} modes")
        self.observable = observable_from_terms([t.model_dump() for t in cfg.observable], n, budget)

    def estimation_config(self, samples=None, seed=None, workers=None, keep_values=0) -> EstimationConfig:
        e = self.cfg.estimation
        return EstimationConfig(
            samples=samples or e.samples,
            seed=e.seed if seed is None else seed,
            workers=workers or e.workers or default_workers(),
            estimator=e.estimator,
            groups=e.groups,
            xi_law=self.cfg.xi.law,
            heavy_tail_threshold=e.heavy_tail_threshold,
            chunk_size=e.chunk_size,
            deltas=tuple(e.deltas),
            term_budget=e.term_budget,
            keep_values=keep_values,
        )
