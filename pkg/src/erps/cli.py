"""Command-line entry point.

Exit codes: 0 success, 1 compare gap above tolerance, 2 config error,
3 inadmissible observable, 4 runtime sampling error, 5 oracle cannot run.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .circuits import AffineMap, PolynomialShearMap, is_symplectic
from .config import Resolved, load_config
from .engine import estimate_variance, plan_samples, run_estimate
from .errors import (ConfigError, InadmissibleObservableError, NodeProximityError,
                     NonFiniteSampleError, OracleDimensionError, OracleUnsupportedError,
                     PersistentNodeError, PolynomialBlowupError, TruncationInsufficientError)
from .observables import check_admissible, observable_to_terms, pullback, quantize
from .oracle import exact_expectation, truncation_sweep
from .states import validate_state

EXIT_OK = 0
EXIT_GAP = 1
EXIT_CONFIG = 2
EXIT_INADMISSIBLE = 3
EXIT_RUNTIME = 4
EXIT_ORACLE = 5

COMPARE_SIGMAS = 5.0


def _dump(obj, path=None):
    text = json.dumps(obj, indent=2, sort_keys=True, default=_json_default)
    if path:
        Path(path).write_text(text + "\n")
    else:
        print(text)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _load(args):
    cfg = load_config(args.config)
    est = cfg.estimation.model_copy(update={
        k: v for k, v in {"samples": args.samples, "seed": args.seed}.items() if v is not None})
    out = cfg.output.model_copy(update={
        k: v for k, v in {"path": args.out, "histogram_bins": args.histogram_bins}.items()
        if v is not None})
    cfg = cfg.model_copy(update={"estimation": est, "output": out})
    # re-validate the updated sub-models through the full schema
    cfg = type(cfg).model_validate(cfg.model_dump())
    return Resolved(cfg, base_dir=Path(args.config).resolve().parent)


def _estimation(res: Resolved, args, keep=0):
    try:
        return res.estimation_config(workers=args.workers, keep_values=keep)
    except ValueError as exc:
        raise ConfigError(f"estimation: {exc}") from exc


def _run_manifest(res: Resolved) -> dict:
    return res.cfg.model_dump(mode="json")


def _write_side_outputs(res: Resolved, report):
    out = res.cfg.output
    vals = report.values
    if vals is None:
        return
    if out.samples_csv:
        with open(out.samples_csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "value"])
            for i, v in enumerate(vals):
                w.writerow([i, repr(float(v))])
    if out.histogram_bins:
        counts, edges = np.histogram(vals, bins=out.histogram_bins)
        hist = {"bin_edges": edges.tolist(), "counts": counts.tolist(), "n_values": int(vals.size)}
        path = out.histogram_path
        if not path and out.path:
            path = str(Path(out.path).with_suffix("")) + ".histogram.json"
        _dump(hist, path)


def cmd_estimate(args) -> int:
    res = _load(args)
    out = res.cfg.output
    keep = out.samples_csv_max if (out.samples_csv or out.histogram_bins) else 0
    config = _estimation(res, args, keep)
    report = run_estimate(res.state, res.circuit, res.observable, config, _run_manifest(res))
    _write_side_outputs(res, report)
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    _dump(report.to_dict(), out.path)
    return EXIT_OK


def _oracle(res: Resolved):
    return exact_expectation(res.state, res.circuit, res.observable, res.cfg.oracle.levels)


def cmd_oracle(args) -> int:
    res = _load(args)
    result = _oracle(res).as_dict()
    if res.cfg.oracle.sweep:
        result["sweep"] = truncation_sweep(res.state, res.circuit, res.observable, res.cfg.oracle.sweep)
    _dump(result, res.cfg.output.path)
    return EXIT_OK


def cmd_compare(args) -> int:
    res = _load(args)
    config = _estimation(res, args)
    # oracle first: a dimension overflow should not cost a sampling run
    orc = _oracle(res)
    report = run_estimate(res.state, res.circuit, res.observable, config, _run_manifest(res))
    gap = abs(report.estimate - orc.value)
    ratio = gap / report.std_error if report.std_error > 0 else (0.0 if gap == 0 else math.inf)
    ok = gap <= COMPARE_SIGMAS * report.std_error or gap == 0
    result = {
        "estimate": report.estimate,
        "std_error": report.std_error,
        "oracle": orc.value,
        "oracle_D_used": orc.D_used,
        "oracle_imag_residual": orc.imag_residual,
        "gap": gap,
        "gap_over_se": ratio,
        "tolerance_sigmas": COMPARE_SIGMAS,
        "within_tolerance": ok,
        "warnings": report.warnings,
        "report": report.to_dict(),
    }
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    _dump(result, res.cfg.output.path)
    return EXIT_OK if ok else EXIT_GAP


def cmd_plan(args) -> int:
    res = _load(args)
    eps = args.epsilon if args.epsilon is not None else res.cfg.plan.epsilon
    delta = args.delta if args.delta is not None else res.cfg.plan.delta
    if eps is None or delta is None:
        raise ConfigError("plan: --epsilon and --delta (or plan.epsilon / plan.delta) are required")
    if not eps > 0 or not 0 < delta < 1:
        raise ConfigError("plan: need epsilon > 0 and 0 < delta < 1")
    pilot = args.pilot or res.cfg.plan.pilot_samples
    config = _estimation(res, args)
    ve = estimate_variance(res.state, res.circuit, res.observable, pilot, config)
    K = plan_samples(eps, delta, ve.variance)
    warnings = []
    if ve.heavy_tail:
        warnings.append(f"heavy-tail: kurtosis proxy {ve.kurtosis_proxy:.3g} exceeds "
                        f"{config.heavy_tail_threshold:g}; the variance estimate may not be stable "
                        "and the recommended K may be unreliable")
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    _dump({"epsilon": eps, "delta": delta, "pilot_samples": pilot, "variance": ve.variance,
           "kurtosis_proxy": ve.kurtosis_proxy, "heavy_tail": ve.heavy_tail,
           "recommended_K": K, "warnings": warnings}, res.cfg.output.path)
    return EXIT_OK


def cmd_validate(args) -> int:
    res = _load(args)
    diag = validate_state(res.state).as_dict()
    gates = []
    for g in res.circuit.maps:
        entry = {"gate": g.name}
        if isinstance(g, AffineMap):
            ok, resid = is_symplectic(g)
            entry.update(symplectic=ok, residual=resid)
        elif isinstance(g, PolynomialShearMap):
            entry.update(symplectic=True, kind=g.kind)
        gates.append(entry)
    pulled = pullback(res.observable, res.circuit)
    ok, bad = check_admissible(pulled)
    report = {
        "state": diag,
        "modes": res.state.modes,
        "gates": gates,
        "pulled_back_observable": observable_to_terms(pulled),
        "admissible": ok,
        "offending_terms": [str(m) for m in bad],
        "quantized": str(quantize(pulled)) if ok else None,
    }
    _dump(report, res.cfg.output.path)
    return EXIT_OK if ok else EXIT_INADMISSIBLE


COMMANDS = {
    "estimate": cmd_estimate,
    "oracle": cmd_oracle,
    "compare": cmd_compare,
    "plan": cmd_plan,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="erps", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="run config JSON (or a previous report)")
        sp.add_argument("--samples", type=int, help="override estimation.samples")
        sp.add_argument("--seed", type=int, help="override estimation.seed")
        sp.add_argument("--workers", type=int, help="worker threads (default $ERPS_WORKERS or 1)")
        sp.add_argument("--out", help="write JSON here instead of stdout")
        sp.add_argument("--histogram-bins", type=int, dest="histogram_bins")
        if name == "plan":
            sp.add_argument("--epsilon", type=float)
            sp.add_argument("--delta", type=float)
            sp.add_argument("--pilot", type=int, help="pilot sample count (default 10000)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_CONFIG
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InadmissibleObservableError as exc:
        print(f"inadmissible observable: {exc}", file=sys.stderr)
        return EXIT_INADMISSIBLE
    except (OracleDimensionError, OracleUnsupportedError, TruncationInsufficientError) as exc:
        print(f"oracle error: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    except (NodeProximityError, PersistentNodeError, NonFiniteSampleError, PolynomialBlowupError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
