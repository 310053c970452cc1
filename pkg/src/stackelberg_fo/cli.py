"""Command-line entry point: ``stackelberg-fo {solve,verify,gradcheck,ratefit}``.

Exit codes: 0 success, 1 usage or configuration error, 2 budget exhausted,
3 verification failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from typing import List, Optional

import numpy as np

from . import problems
from .config import RunConfig, load_config
from .core import SmoothnessConstants
from .errors import ConfigError, StackelbergError
from .oracle import LemmaGrid, gradcheck_problem, verify_lemma_bounds
from .outer import (best_so_far, descent_check, error_decomposition_check,
                    leader_step_check, run, triangle_check)
from .traceio import CsvTraceSink, read_trace

EXIT_OK, EXIT_USAGE, EXIT_BUDGET, EXIT_VERIFY = 0, 1, 2, 3
GRADCHECK_TOL = 1e-5
DEFAULT_OUT = "stackelberg_out"


def _print_json(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable))


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    raise TypeError(f"cannot serialize {type(v).__name__}")


def _num(v):
    """JSON has no inf/nan; encode them as strings."""
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else repr(v)


def build_entry(cfg: RunConfig) -> problems.ProblemCatalogEntry:
    entry = problems.get_entry(cfg.require_problem(), **cfg.problem_params)
    if cfg.constants:
        merged = {**entry.problem.constants.as_dict(), **cfg.constants}
        try:
            entry = entry.with_constants(SmoothnessConstants(**merged))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"constants: {exc}") from None
    return entry


def _solve(cfg: RunConfig, entry, sink=None):
    oracle = entry.oracle() if cfg.use_oracle else None
    x0 = entry.x0 if cfg.x0 is None else np.atleast_1d(np.asarray(cfg.x0, dtype=float))
    return run(entry.problem, cfg.schedule_params(), oracle=oracle, trace_sink=sink, x0=x0)


def cmd_solve(cfg: RunConfig) -> int:
    entry = build_entry(cfg)
    params = cfg.schedule_params()
    out_dir = cfg.out or DEFAULT_OUT
    os.makedirs(out_dir, exist_ok=True)
    meta = {"problem": entry.name, "rho": params.rho, "eps_prime": params.eps_prime,
            "alpha": params.alpha, "seed": cfg.seed}
    with open(os.path.join(out_dir, "trace.csv"), "w", encoding="utf-8", newline="") as fh:
        outcome = _solve(cfg, entry, CsvTraceSink(fh, meta))
    best = outcome.best_iterate
    summary = {
        "problem": entry.name,
        "status": outcome.status,
        "iterations": len(outcome.trace),
        "best_grad_norm": _num(best.grad_norm) if best else None,
        "grad_source": ("true" if best is not None and best.true_grad_norm is not None
                        else "surrogate"),
        "true_grad_norm": _num(outcome.trace[-1].true_grad_norm) if outcome.trace else None,
        "surrogate_grad_norm": _num(outcome.trace[-1].surrogate_grad_norm) if outcome.trace else None,
        "follower_gap_max": _num(outcome.trace[-1].follower_gap_max) if outcome.trace else None,
        "total_grad_evals": outcome.total_grad_evals,
        "certificate_grad_evals": outcome.total_cert_evals,
        "wall_time": outcome.wall_time,
        "final_x": list(outcome.trace[-1].x) if outcome.trace else None,
        "alpha": params.alpha,
        "error": str(outcome.error) if outcome.error else None,
    }
    with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    _print_json(summary)
    if outcome.status == "converged":
        return EXIT_OK
    if outcome.status == "budget_exhausted":
        return EXIT_BUDGET
    return EXIT_USAGE


def lemma_grid(entry, constants, n_points: int = 11) -> LemmaGrid:
    threshold = 2.0 * constants.ell_f1 / constants.mu_g
    lambdas = [2.0 ** e for e in range(1, 11) if 2.0 ** e >= threshold]
    if not lambdas:
        lambdas = [threshold]
    lo, hi = entry.verify_range
    return LemmaGrid.default(lo, hi, n_points=n_points, lambdas=lambdas)


def verify_entry(cfg: RunConfig, entry) -> List[dict]:
    """Lemma bounds on a grid plus trace checks on a fresh oracle-backed solve."""
    oracle = entry.oracle()
    constants = entry.problem.constants
    rows = []
    for chk in verify_lemma_bounds(entry.spec, constants, lemma_grid(entry, constants)).values():
        rows.append({"name": chk.name, "max_ratio": _num(chk.max_ratio), "pass": chk.passed})
    solve_cfg = RunConfig(**{**cfg.__dict__, "use_oracle": True})
    outcome = _solve(solve_cfg, entry)
    trace = outcome.trace
    eta = outcome.params.eta
    reports = [descent_check(trace, eta, oracle),
               error_decomposition_check(trace, oracle, entry.problem),
               error_decomposition_check(trace, oracle, entry.problem, exact_inner=True),
               leader_step_check(trace, entry.problem),
               triangle_check(trace, oracle, entry.problem)]
    for rep in reports:
        key = "max_ratio" if rep.kind == "ratio" else "max_violation"
        rows.append({"name": rep.name, key: _num(rep.value), "pass": rep.passed})
    return rows


def cmd_verify(cfg: RunConfig) -> int:
    entry = build_entry(cfg)
    if entry.spec is None:
        print(f"error: oracle unavailable for problem {entry.name!r}", file=sys.stderr)
        return EXIT_USAGE
    rows = verify_entry(cfg, entry)
    report = {"problem": entry.name, "checks": rows, "pass": all(r["pass"] for r in rows)}
    if cfg.out:
        os.makedirs(cfg.out, exist_ok=True)
        with open(os.path.join(cfg.out, "verify.json"), "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
    _print_json(report)
    return EXIT_OK if report["pass"] else EXIT_VERIFY


def cmd_gradcheck(cfg: RunConfig) -> int:
    entry = build_entry(cfg)
    worst = gradcheck_problem(entry.problem, entry.spec, seed=cfg.seed)
    for key in sorted(worst):
        print(f"{key:24s} {worst[key]:.3e}")
    ok = all(v <= GRADCHECK_TOL for v in worst.values())
    print("PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_VERIFY


def fit_rate(records, alpha: float, slack: float = 0.0) -> dict:
    """Least-squares fit of log(best |grad F| so far) on log(cumulative evals)."""
    if any(r.true_grad_norm is None for r in records):
        raise ConfigError("trace lacks true_grad_norm; rerun with the oracle enabled")
    if len(records) < 5:
        raise ConfigError(f"need at least 5 points, got {len(records)}")
    evals = np.array([r.grad_evals_cum for r in records], dtype=float)
    best = np.array(best_so_far(records), dtype=float)
    keep = best > 0
    lx, ly = np.log(evals[keep]), np.log(best[keep])
    if lx.size < 5:
        raise ConfigError("fewer than 5 points with positive gradient norm")
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    theory = -1.0 / (6.0 + alpha)
    return {"slope": float(slope), "intercept": float(intercept), "r2": r2,
            "theory_slope": theory, "points": int(lx.size),
            "pass": bool(slope <= theory + slack)}


def cmd_ratefit(paths: List[str], slack: float, alpha: Optional[float] = None) -> int:
    results = {}
    for path in paths:
        try:
            records, meta = read_trace(path)
        except OSError as exc:
            raise ConfigError(f"cannot read trace {path!r}: {exc}") from None
        a = alpha if alpha is not None else meta.get("alpha")
        if a is None:
            raise ConfigError(f"{path}: trace header lacks alpha; pass --alpha")
        results[path] = fit_rate(records, float(a), slack)
    _print_json(results)
    return EXIT_OK if all(r["pass"] for r in results.values()) else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stackelberg-fo", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("solve", "verify", "gradcheck"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="TOML run configuration")
        p.add_argument("--problem", help="catalog name; overrides problem.name")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int)
        p.add_argument("overrides", nargs="*", metavar="KEY=VALUE",
                       help="dotted overrides, e.g. schedule.rho=1.5")
    p = sub.add_parser("ratefit")
    p.add_argument("traces", nargs="+")
    p.add_argument("--slack", type=float, default=0.05)
    p.add_argument("--alpha", type=float, help="override the alpha recorded in each trace")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        if args.command == "ratefit":
            return cmd_ratefit(args.traces, args.slack, args.alpha)
        overrides = list(args.overrides)
        if args.problem:
            overrides.append(f"problem.name={json.dumps(args.problem)}")
        if args.out:
            overrides.append(f"output.dir={json.dumps(args.out)}")
        if args.seed is not None:
            overrides.append(f"seed={args.seed}")
        cfg = load_config(args.config, overrides)
        return {"solve": cmd_solve, "verify": cmd_verify, "gradcheck": cmd_gradcheck}[args.command](cfg)
    except (StackelbergError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
