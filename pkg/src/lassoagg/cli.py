"""Batch command-line interface: CSV ingestion, pipeline dispatch, and
canonical JSON reporting.

Exit codes: 0 success, 2 invalid input, 3 solver non-convergence (the report
is still written).  The results section of a report is byte-identical across
runs with the same config and seed; volatile data (timestamps, timings) live
in the environment section.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from typing import Optional

import numpy as np

from . import __version__
from .aggregation import CritResult, QAggResult
from .design import DesignMatrix, Support
from .errors import DegenerateVarianceError, InvalidInputError
from .path import SupportFamily, compute_path, path_support_family
from .pipelines import PipelineReport, path_aggregate, sqrt_lasso_pipeline
from .simulation import TrialConfig, monte_carlo
from .solvers import sqrt_lasso, sqrt_lasso_universal_lambda
from .weights import log_inv_weight, total_mass, verify_weight_bounds

SCHEMA_VERSION = "1"


class ParseError(InvalidInputError):
    pass


def load_matrix_csv(path: str, header: bool = False) -> DesignMatrix:
    """Load an RFC-4180 CSV (no header by default) as a design matrix."""
    rows = _load_rows(path, header)
    width = len(rows[0][1])
    for lineno, row in rows:
        if len(row) != width:
            raise ParseError(f"{path}:{lineno}: ragged row ({len(row)} cells, expected {width})")
    return DesignMatrix(np.array([r for _, r in rows]))


def load_vector_csv(path: str, header: bool = False) -> np.ndarray:
    rows = _load_rows(path, header)
    values = []
    for lineno, row in rows:
        if len(row) != 1:
            raise ParseError(f"{path}:{lineno}: expected a single column, got {len(row)}")
        values.append(row[0])
    return np.array(values)


def _load_rows(path, header):
    rows = []
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise ParseError(f"cannot open {path}: {exc}") from exc
    with fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if header and lineno == 1:
                continue
            if not row:
                continue
            parsed = []
            for colno, cell in enumerate(row, start=1):
                try:
                    v = float(cell)
                except ValueError:
                    raise ParseError(f"{path}:{lineno}: non-numeric cell in column {colno}: {cell!r}")
                if not np.isfinite(v):
                    raise ParseError(f"{path}:{lineno}: non-finite value in column {colno}: {cell!r}")
                parsed.append(v)
            rows.append((lineno, parsed))
    if not rows:
        raise ParseError(f"{path}: empty file")
    return rows


def save_matrix_csv(path: str, mat: np.ndarray):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in np.atleast_2d(mat):
            writer.writerow([repr(float(v)) for v in row])


def _jsonable(obj):
    if isinstance(obj, Support):
        return obj.one_based()
    if isinstance(obj, SupportFamily):
        return {"source": obj.source, "supports": [_jsonable(T) for T in obj.supports]}
    if isinstance(obj, QAggResult):
        return {
            "kind": "q",
            "theta_hat": _jsonable(obj.theta_hat.theta),
            "objective": obj.objective,
            "fw_gap": obj.fw_gap,
            "sigma_hat_sq_used": obj.sigma_hat_sq_used,
            "converged": obj.converged,
            "iterations": obj.iterations,
            "mu_hat": _jsonable(obj.mu_hat),
        }
    if isinstance(obj, CritResult):
        return {
            "kind": "crit",
            "chosen": _jsonable(obj.chosen),
            "crit_value": obj.crit_value,
            "sigma_hat_sq_used": obj.sigma_hat_sq_used,
            "mu_hat": _jsonable(obj.mu_hat),
        }
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def canonical_json(obj) -> str:
    # sorted keys + repr floats (shortest round-trip) = byte-stable output
    return json.dumps(_jsonable(obj), sort_keys=True, separators=(",", ":"), allow_nan=False)


def write_report(config: dict, results: dict, environment_extra: Optional[dict],
                 out: Optional[str]):
    report = {
        "schema_version": SCHEMA_VERSION,
        "config": config,
        "results": results,
        "environment": {
            "version": __version__,
            "numpy": np.__version__,
            "timestamp": time.time(),
            **(environment_extra or {}),
        },
    }
    text = canonical_json(report)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _pipeline_results(report: PipelineReport) -> dict:
    res = {
        "family": _jsonable(report.family),
        "sigma_hat_sq": report.sigma_hat_sq,
        "method": report.method,
        "result": _jsonable(report.result),
    }
    if report.path_meta:
        res["path_meta"] = _jsonable(report.path_meta)
    if report.grid_meta:
        res["grid_meta"] = _jsonable(report.grid_meta)
    return res


def _add_data_flags(p):
    p.add_argument("--x", required=True, help="design matrix CSV (rows = observations)")
    p.add_argument("--y", required=True, help="response vector CSV")
    p.add_argument("--header", action="store_true", help="skip the first CSV row")


def _add_common_flags(p):
    p.add_argument("--out", help="report output path (default: stdout)")
    p.add_argument("--threads", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lassoagg",
                                     description="Lasso-path support aggregation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("path", help="compute the Lasso path and its support family")
    _add_data_flags(p)
    _add_common_flags(p)
    p.add_argument("--max-knots", type=int, default=None)
    p.add_argument("--path-csv", help="also export (lambda, residual loss, support size) rows")

    p = sub.add_parser("aggregate", help="aggregate the Lasso-path supports")
    _add_data_flags(p)
    _add_common_flags(p)
    p.add_argument("--method", choices=["q", "crit"], default="q")
    p.add_argument("--sigma", type=float, help="known noise variance estimate (sigma^2)")
    p.add_argument("--sigma-mode", choices=["known", "sqrt_lasso"], default="known")
    p.add_argument("--max-knots", type=int, default=None)
    p.add_argument("--tol-gap", type=float, default=None)

    p = sub.add_parser("sqrt-pipeline", help="square-root-Lasso grid pipeline")
    _add_data_flags(p)
    _add_common_flags(p)
    p.add_argument("--method", choices=["q", "crit"], default="q")
    p.add_argument("--lambda-min", type=float, default=None)
    p.add_argument("--grid-size", type=int, default=20)
    p.add_argument("--grid-mode", choices=["spanning", "paper-literal"], default="spanning")
    p.add_argument("--tol-gap", type=float, default=None)

    p = sub.add_parser("simulate", help="Monte Carlo oracle-inequality verification")
    _add_common_flags(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--x-level", "--x", dest="x_level", type=float, default=3.0)
    p.add_argument("--reps", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--method", choices=["q", "crit"], default="q")
    p.add_argument("--bound", choices=["soi_path", "soi_supports", "oi_supports"],
                   default="soi_path")
    p.add_argument("--sigma-mode", choices=["known", "sqrt_lasso"], default="known")
    p.add_argument("--design", choices=["iid_gaussian", "equicorrelated", "orthonormal"],
                   default="iid_gaussian")
    p.add_argument("--rho", type=float, default=0.5)

    p = sub.add_parser("weights", help="support-weight table diagnostics")
    _add_common_flags(p)
    p.add_argument("--p", type=int, required=True)

    return parser


def _cmd_path(args):
    X = load_matrix_csv(args.x, args.header)
    y = load_vector_csv(args.y, args.header)
    path = compute_path(X, y, max_knots=args.max_knots)
    family = path_support_family(path)
    if args.path_csv:
        rows = []
        for k, lam in enumerate(path.knots):
            beta = path.beta_at(float(lam))
            loss = float(np.sum((y - X.entries @ beta) ** 2)) / X.n
            rows.append([float(lam), loss, int(np.sum(beta != 0.0))])
        save_matrix_csv(args.path_csv, np.array(rows))
    results = {
        "knots": _jsonable(path.knots),
        "supports": [_jsonable(T) for T in path.supports],
        "family": _jsonable(family),
        "truncated": path.truncated,
        "degenerate": path.degenerate,
    }
    config = {"command": "path", "x": args.x, "y": args.y,
              "max_knots": args.max_knots}
    write_report(config, results, None, args.out)
    return 0


def _resolve_sigma(args, X, y):
    if args.sigma_mode == "known":
        if args.sigma is None:
            raise InvalidInputError("--sigma is required with --sigma-mode known")
        return float(args.sigma)
    return sqrt_lasso(X, y, sqrt_lasso_universal_lambda(X.n, X.p)).sigma_hat_sq


def _cmd_aggregate(args):
    X = load_matrix_csv(args.x, args.header)
    y = load_vector_csv(args.y, args.header)
    sigma_hat_sq = _resolve_sigma(args, X, y)
    agg_opts = {"tol_gap": args.tol_gap} if (args.method == "q" and args.tol_gap) else None
    report = path_aggregate(X, y, sigma_hat_sq, method=args.method,
                            path_opts={"max_knots": args.max_knots},
                            agg_opts=agg_opts)
    config = {"command": "aggregate", "x": args.x, "y": args.y,
              "method": args.method, "sigma_mode": args.sigma_mode,
              "sigma": args.sigma, "max_knots": args.max_knots,
              "tol_gap": args.tol_gap}
    write_report(config, _pipeline_results(report),
                 {"timing": report.timing}, args.out)
    if isinstance(report.result, QAggResult) and not report.result.converged:
        return 3
    return 0


def _cmd_sqrt_pipeline(args):
    X = load_matrix_csv(args.x, args.header)
    y = load_vector_csv(args.y, args.header)
    agg_opts = {"tol_gap": args.tol_gap} if (args.method == "q" and args.tol_gap) else None
    report = sqrt_lasso_pipeline(X, y, lambda_min=args.lambda_min, M=args.grid_size,
                                 method=args.method, grid_mode=args.grid_mode,
                                 agg_opts=agg_opts)
    config = {"command": "sqrt-pipeline", "x": args.x, "y": args.y,
              "method": args.method, "lambda_min": args.lambda_min,
              "grid_size": args.grid_size, "grid_mode": args.grid_mode,
              "tol_gap": args.tol_gap, "threads": args.threads}
    write_report(config, _pipeline_results(report),
                 {"timing": report.timing}, args.out)
    if isinstance(report.result, QAggResult) and not report.result.converged:
        return 3
    return 0


def _cmd_simulate(args):
    config = TrialConfig(n=args.n, p=args.p, s=args.s, sigma=args.sigma,
                         x=args.x_level, method=args.method, bound=args.bound,
                         sigma_mode=args.sigma_mode, seed=args.seed,
                         design_kind=args.design, rho=args.rho)
    report = monte_carlo(config, reps=args.reps, parallelism=max(1, args.threads))
    checks = report.pop("checks")
    results = dict(report)
    results["lhs"] = [c.lhs for c in checks]
    results["rhs"] = [c.rhs for c in checks]
    config_echo = {"command": "simulate", "n": args.n, "p": args.p, "s": args.s,
                   "sigma": args.sigma, "x_level": args.x_level, "reps": args.reps,
                   "seed": args.seed, "method": args.method, "bound": args.bound,
                   "sigma_mode": args.sigma_mode, "design": args.design,
                   "rho": args.rho}
    write_report(config_echo, results, {"threads": args.threads}, args.out)
    return 0


def _cmd_weights(args):
    p = args.p
    results = {
        "p": p,
        "log_inv_weight_by_size": [log_inv_weight(p, k) for k in range(p + 1)],
        "bounds_hold": verify_weight_bounds(p) if p <= 64 else None,
        "total_mass": total_mass(p) if p <= 30 else None,
    }
    write_report({"command": "weights", "p": p}, results, None, args.out)
    return 0


_COMMANDS = {
    "path": _cmd_path,
    "aggregate": _cmd_aggregate,
    "sqrt-pipeline": _cmd_sqrt_pipeline,
    "simulate": _cmd_simulate,
    "weights": _cmd_weights,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (InvalidInputError, DegenerateVarianceError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
