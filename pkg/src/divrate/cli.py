"""Command line interface: ``divrate {direct,inverse,sweep,convergence,reproduce}``.

Exit codes: 0 on success, 1 when a solver fails, 2 on bad arguments.
"""
from __future__ import annotations

import argparse
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from .direct import DirectConfig, solve_eigenpair
from .errors import DivrateError
from .experiments import (
    DEFAULT_ALPHAS,
    DEFAULT_EPSILONS,
    ExperimentPlan,
    convergence_from_records,
    read_sweep_csv,
    reproduce_figures,
    run_direct,
    run_sweep,
    tail_stats,
    write_convergence_csv,
    write_sweep_csv,
)
from .grid import Grid, format_float, read_comment_header, read_grid_function, resample, write_grid_function
from .inverse import METHODS, InverseConfig, solve, write_inverse_csv
from .metrics import delta_metric, relative_l2
from .noise import NoiseSpec, perturb
from .rates import parse_rate


def float_list(text: str) -> tuple:
    """Comma separated floats, or ``logspace:<lo>:<hi>:<n>`` (decimal exponents)."""
    try:
        if text.startswith("logspace:"):
            lo, hi, n = text.split(":")[1:]
            return tuple(float(v) for v in np.logspace(float(lo), float(hi), int(n)))
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}") from None


def int_list(text: str) -> tuple:
    try:
        if ".." in text:
            lo, hi = text.split("..")
            return tuple(range(int(lo), int(hi) + 1))
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of integers: {text!r}") from None


def method_list(text: str) -> tuple:
    methods = tuple(m.strip() for m in text.split(",") if m.strip())
    bad = [m for m in methods if m not in METHODS]
    if bad or not methods:
        raise argparse.ArgumentTypeError(f"methods must be drawn from {','.join(METHODS)}")
    return methods


def rate_spec(text: str) -> str:
    try:
        parse_rate(text)
    except (DivrateError, OSError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    return text


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _nonneg_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not value >= 0:
        raise argparse.ArgumentTypeError("must be nonnegative")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="divrate", description="Division-rate recovery: direct solves, inverse solves and noise sweeps."
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("direct", help="stable distribution and growth rate for a division rate")
    p.add_argument("--b", type=rate_spec, default="const:1")
    p.add_argument("--points", type=_positive_int, default=800, help="number of grid intervals I")
    p.add_argument("--domain", type=float, default=8.0, help="right end 2L of the domain")
    p.add_argument("--theta", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iters", type=_positive_int, default=200_000)
    p.add_argument("--out", required=True)

    p = sub.add_parser("inverse", help="recover B from (noisy) data")
    p.add_argument("--method", choices=METHODS, required=True)
    p.add_argument("--alpha", type=_nonneg_float, default=1e-2)
    p.add_argument("--eps", type=_nonneg_float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--exact-lambda", action="store_true",
                   help="use the reference growth rate instead of the estimate from data")
    p.add_argument("--n", default="auto", help="CSV from `divrate direct`, or 'auto' to solve it")
    p.add_argument("--b", type=rate_spec, default="const:1", help="true rate (data generation and error)")
    p.add_argument("--points", type=_positive_int, default=100, help="direct-problem intervals for --n auto")
    p.add_argument("--L", type=float, default=4.0)
    p.add_argument("--refine", type=_positive_int, default=10)
    p.add_argument("--b-threshold", type=float, default=0.01)
    p.add_argument("--out", required=True)

    p = sub.add_parser("sweep", help="error over a (method, epsilon, alpha, seed) grid")
    p.add_argument("--b", type=rate_spec, default="const:1")
    p.add_argument("--alphas", type=float_list, default=DEFAULT_ALPHAS)
    p.add_argument("--epsilons", type=float_list, default=DEFAULT_EPSILONS)
    p.add_argument("--seeds", type=int_list, default=(0, 1, 2, 3, 4))
    p.add_argument("--methods", type=method_list, default=METHODS)
    p.add_argument("--exact-lambda", action="store_true")
    p.add_argument("--points", type=_positive_int, default=100)
    p.add_argument("--L", type=float, default=4.0)
    p.add_argument("--refine", type=_positive_int, default=10)
    p.add_argument("--theta", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--b-threshold", type=float, default=0.01)
    p.add_argument("--jobs", type=_positive_int, default=1)
    p.add_argument("--cache-dir", default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("convergence", help="fit min-over-alpha error against noise level")
    p.add_argument("--from", dest="source", required=True, help="sweep CSV")
    p.add_argument("--metric", choices=("delta", "delta_rel_l2"), default="delta")
    p.add_argument("--out", required=True)

    p = sub.add_parser("reproduce", help="write the CSV data behind all figures")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--quick", action="store_true", help="small grids, two seeds")
    p.add_argument("--jobs", type=_positive_int, default=1)
    p.add_argument("--cache-dir", default=None)
    return parser


def _cmd_direct(args) -> None:
    grid = Grid.from_intervals(args.domain, args.points)
    cfg = DirectConfig(grid, theta=args.theta, stop_tol=args.tol, max_iters=args.max_iters)
    rate = parse_rate(args.b)
    pair = solve_eigenpair(rate.on(grid), cfg)
    ratio, mass = tail_stats(pair, args.domain / 2)
    header = [
        f"command=direct, b={args.b}, points={args.points}, domain={format_float(args.domain)}, "
        f"theta={format_float(args.theta)}, tol={format_float(args.tol)}",
        f"lambda0={format_float(pair.lambda0)}, iterations={pair.iterations}, "
        f"final_residual={format_float(pair.final_residual)}, "
        f"lambda_log_ratio={format_float(pair.diagnostics['lambda_log_ratio'])}",
        f"tail_ratio={format_float(ratio)}, tail_mass={format_float(mass)}",
    ]
    write_grid_function(pair.N, args.out, header, "N")
    print(f"lambda0={format_float(pair.lambda0)} iterations={pair.iterations}")


def _cmd_inverse(args) -> None:
    plan = ExperimentPlan(b_spec=args.b, L=args.L, I_direct=args.points, refine_factor=args.refine,
                          b_threshold=args.b_threshold)
    if args.n == "auto":
        pair = run_direct(plan)
        N, lambda_ref = pair.N, pair.lambda0
        fine = plan.inverse_grid
    else:
        N = read_grid_function(args.n)
        meta = read_comment_header(args.n)
        lambda_ref = float(meta["lambda0"]) if "lambda0" in meta else None
        L = min(args.L, N.grid.x_max)
        fine = Grid.from_intervals(L, args.refine * N.grid.intervals)
    rate = parse_rate(args.b)
    if rate.constant:
        lambda_ref = rate.constant
    if args.exact_lambda and lambda_ref is None:
        raise DivrateError("--exact-lambda needs a constant --b or a CSV carrying lambda0")

    N_eps = perturb(resample(N, fine), NoiseSpec(args.eps, args.seed))
    cfg = InverseConfig(args.alpha, args.b_threshold, lambda_ref if args.exact_lambda else None)
    res = solve(args.method, N_eps, cfg)
    B_true = rate.on(fine)
    delta = delta_metric(B_true, N_eps, res.H)
    header = [
        f"command=inverse, b={args.b}, n={args.n}, eps={format_float(args.eps)}, seed={args.seed}, "
        f"points={fine.n_points}, L={format_float(fine.x_max)}",
        f"delta={format_float(delta)}, delta_rel_l2={format_float(relative_l2(B_true, N_eps, res.H))}",
    ]
    write_inverse_csv(res, N_eps, args.out, header)
    print(f"delta={format_float(delta)} lambda={format_float(res.lambda_used.value)}")


def _cmd_sweep(args) -> None:
    plan = ExperimentPlan(
        b_spec=args.b, L=args.L, I_direct=args.points, refine_factor=args.refine,
        epsilons=args.epsilons, alphas=args.alphas, seeds=args.seeds, methods=args.methods,
        use_exact_lambda=args.exact_lambda, theta=args.theta, stop_tol=args.tol,
        b_threshold=args.b_threshold, cache_dir=args.cache_dir, jobs=args.jobs,
    )
    records = run_sweep(plan)
    write_sweep_csv(records, args.out, ["command=sweep"] + plan.header_lines())
    failed = sum(not r.ok for r in records)
    print(f"records={len(records)} failed={failed}")


def _cmd_convergence(args) -> None:
    records = read_sweep_csv(args.source)
    results = convergence_from_records(records, args.metric)
    write_convergence_csv(results, args.out, [f"command=convergence, from={args.source}"])
    for res in results.values():
        print(f"{res.method} [{res.lambda_source}] slope={res.min_error.slope:.4f} "
              f"alpha_slope={res.argmin_alpha.slope:.4f}")


def _cmd_reproduce(args) -> None:
    for path in reproduce_figures(args.out_dir, quick=args.quick, jobs=args.jobs, cache_dir=args.cache_dir):
        print(path)


COMMANDS = {
    "direct": _cmd_direct,
    "inverse": _cmd_inverse,
    "sweep": _cmd_sweep,
    "convergence": _cmd_convergence,
    "reproduce": _cmd_reproduce,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except (FileNotFoundError, IsADirectoryError) as exc:
        print(f"divrate: error: {exc}", file=sys.stderr)
        return 2
    except (DivrateError, FloatingPointError) as exc:
        print(f"divrate: solver error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
