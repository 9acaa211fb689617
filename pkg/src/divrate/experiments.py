"""End-to-end experiment pipeline: direct solve, noisy data, inverse sweeps, convergence fits.

The direct problem is solved on ``[0, 2L]`` and the inverse problems on a
``refine_factor`` times finer grid over ``[0, L]``.
"""
from __future__ import annotations

import csv
import hashlib
import logging
import math
import warnings
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .direct import DirectConfig, EigenPair, solve_eigenpair
from .errors import DivrateError, DomainError
from .grid import Grid, GridFunction, format_float, resample
from .inverse import METHODS, InverseConfig, solve
from .metrics import ConvergenceFit, delta_metric, fit_loglog_slope, min_over_alpha, relative_l2
from .noise import NoiseSpec, perturb
from .rates import parse_rate

logger = logging.getLogger(__name__)

DEFAULT_ALPHAS = tuple(float(a) for a in np.logspace(-3, 0, 13))
DEFAULT_EPSILONS = (0.01, 0.05, 0.1)
SMALL_EPSILONS = (1e-4, 3e-4, 1e-3, 3e-3)
ESTIMATED = "estimated"
EXACT = "exact"

SWEEP_COLUMNS = (
    "method", "epsilon", "alpha", "seed", "delta", "delta_rel_l2",
    "lambda_used", "lambda_abs_err", "lambda_source", "ok",
)


class TailWarning(UserWarning):
    """The stable distribution is not negligible on the right half of the direct domain."""


@dataclass(frozen=True)
class ExperimentPlan:
    b_spec: str = "const:1"
    L: float = 4.0
    I_direct: int = 100
    refine_factor: int = 10
    epsilons: tuple = DEFAULT_EPSILONS
    alphas: tuple = DEFAULT_ALPHAS
    seeds: tuple = (0, 1, 2, 3, 4)
    methods: tuple = METHODS
    use_exact_lambda: bool = False
    theta: float = 1.0
    stop_tol: float = 1e-10
    b_threshold: float = 0.01
    cache_dir: Optional[str] = None
    jobs: int = 1

    def __post_init__(self):
        if self.refine_factor < 1:
            raise DomainError("refine_factor must be >= 1")
        if self.I_direct < 2:
            raise DomainError("I_direct must be >= 2")
        bad = set(self.methods) - set(METHODS)
        if bad:
            raise DomainError(f"unknown methods: {sorted(bad)}")

    @classmethod
    def noiseless(cls, **kw) -> "ExperimentPlan":
        kw.setdefault("I_direct", 1000)
        kw.setdefault("epsilons", (0.0,))
        kw.setdefault("seeds", (0,))
        return cls(**kw)

    @classmethod
    def small_noise(cls, **kw) -> "ExperimentPlan":
        kw.setdefault("I_direct", 500)
        kw.setdefault("epsilons", SMALL_EPSILONS)
        return cls(**kw)

    @property
    def direct_grid(self) -> Grid:
        return Grid.from_intervals(2.0 * self.L, self.I_direct)

    @property
    def inverse_grid(self) -> Grid:
        return Grid.from_intervals(self.L, self.refine_factor * self.I_direct)

    def header_lines(self) -> list[str]:
        return [
            f"b={self.b_spec}, L={format_float(self.L)}, I_direct={self.I_direct}, "
            f"refine_factor={self.refine_factor}, theta={format_float(self.theta)}, "
            f"stop_tol={format_float(self.stop_tol)}, b_threshold={format_float(self.b_threshold)}",
            "epsilons=" + " ".join(format_float(e) for e in self.epsilons),
            "alphas=" + " ".join(format_float(a) for a in self.alphas),
            "seeds=" + " ".join(str(s) for s in self.seeds),
            "methods=" + " ".join(self.methods) + f", use_exact_lambda={self.use_exact_lambda}",
        ]


@dataclass(frozen=True)
class SweepRecord:
    method: str
    epsilon: float
    alpha: float
    seed: int
    delta: float
    delta_rel_l2: float
    lambda_used: float
    lambda_abs_err: float
    lambda_source: str = ESTIMATED
    ok: bool = True

    def sort_key(self):
        return (METHODS.index(self.method), self.lambda_source, self.epsilon, self.alpha, self.seed)


# --- direct problem ------------------------------------------------------------------

def _cache_key(plan: ExperimentPlan) -> str:
    ident = f"{plan.b_spec}|{plan.I_direct}|{plan.L!r}|{plan.theta!r}|{plan.stop_tol!r}"
    path = Path(plan.b_spec)
    if path.is_file():
        ident += "|" + hashlib.sha256(path.read_bytes()).hexdigest()
    return hashlib.sha256(ident.encode()).hexdigest()[:24]


def _load_cached(path: Path, grid: Grid) -> Optional[EigenPair]:
    try:
        with np.load(path, allow_pickle=False) as data:
            diag = {k[5:]: float(data[k]) for k in data.files if k.startswith("diag_")}
            return EigenPair(
                GridFunction(grid, data["N"]),
                float(data["lambda0"]),
                int(data["iterations"]),
                float(data["final_residual"]),
                diag,
            )
    except (OSError, KeyError, ValueError) as exc:
        logger.warning("ignoring unreadable cache entry %s: %s", path, exc)
        return None


def _store_cached(path: Path, pair: EigenPair) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp.npz")
    np.savez(
        tmp,
        N=pair.N.values,
        lambda0=pair.lambda0,
        iterations=pair.iterations,
        final_residual=pair.final_residual,
        **{f"diag_{k}": v for k, v in pair.diagnostics.items()},
    )
    tmp.replace(path)


def tail_stats(pair: EigenPair, L: float) -> tuple[float, float]:
    """Return (max_{x>=L} N / max N, dx * sum_{x>=L} N)."""
    N = pair.N
    mask = N.x >= L - 1e-12 * L
    peak = float(N.values.max())
    ratio = float(N.values[mask].max() / peak) if peak > 0 and mask.any() else 0.0
    return ratio, float(N.grid.dx * N.values[mask].sum())


def run_direct(plan: ExperimentPlan, tail_tol: float = 1e-6) -> EigenPair:
    """Solve the eigenproblem on ``[0, 2L]`` (cached when ``plan.cache_dir`` is set).

    Emits :class:`TailWarning` when ``max_{x >= L} N > tail_tol * max N``.
    """
    grid = plan.direct_grid
    pair = None
    cache_path = None
    if plan.cache_dir is not None:
        cache_path = Path(plan.cache_dir) / f"direct-{_cache_key(plan)}.npz"
        if cache_path.exists():
            pair = _load_cached(cache_path, grid)
    if pair is None:
        rate = parse_rate(plan.b_spec)
        cfg = DirectConfig(grid, theta=plan.theta, stop_tol=plan.stop_tol)
        pair = solve_eigenpair(rate.on(grid), cfg)
        if cache_path is not None:
            _store_cached(cache_path, pair)

    ratio, mass = tail_stats(pair, plan.L)
    pair.diagnostics["tail_ratio"] = ratio
    pair.diagnostics["tail_mass"] = mass
    if ratio > tail_tol:
        warnings.warn(
            f"N is not negligible beyond x={plan.L}: max tail/peak = {ratio:.3e} "
            f"(tail mass {mass:.3e}); consider a larger domain",
            TailWarning,
            stacklevel=2,
        )
    return pair


def reference_lambda(plan: ExperimentPlan, pair: EigenPair) -> float:
    """Exact growth rate when the division rate is constant, else the direct solver's."""
    rate = parse_rate(plan.b_spec)
    return rate.constant if rate.constant else pair.lambda0


# --- sweeps ----------------------------------------------------------------------------

def _failed(method, eps, alpha, seed, source) -> SweepRecord:
    nan = math.nan
    return SweepRecord(method, eps, alpha, seed, nan, nan, nan, nan, source, False)


def _sweep_job(plan: ExperimentPlan, N_direct: np.ndarray, lambda0: float, eps: float, seed: int):
    fine = plan.inverse_grid
    N = resample(GridFunction(plan.direct_grid, N_direct), fine)
    N_eps = perturb(N, NoiseSpec(eps, seed))
    B_true = parse_rate(plan.b_spec).on(fine)
    sources = [(ESTIMATED, None)]
    if plan.use_exact_lambda:
        sources.append((EXACT, lambda0))

    records = []
    for method in plan.methods:
        for source, override in sources:
            brute_cache = None
            for alpha in plan.alphas:
                if method == "brute" and brute_cache is not None:
                    records.append(replace(brute_cache, alpha=alpha))
                    continue
                cfg = InverseConfig(alpha, plan.b_threshold, override)
                try:
                    res = solve(method, N_eps, cfg)
                    rec = SweepRecord(
                        method, eps, alpha, seed,
                        delta_metric(B_true, N_eps, res.H),
                        relative_l2(B_true, N_eps, res.H),
                        res.lambda_used.value,
                        abs(res.lambda_used.value - lambda0),
                        source,
                        bool(np.all(np.isfinite(res.H.values))),
                    )
                except (DivrateError, FloatingPointError) as exc:
                    logger.warning("%s eps=%g alpha=%g seed=%d failed: %s", method, eps, alpha, seed, exc)
                    rec = _failed(method, eps, alpha, seed, source)
                records.append(rec)
                if method == "brute":
                    brute_cache = rec
    return records


def run_sweep(plan: ExperimentPlan, pair: Optional[EigenPair] = None) -> list[SweepRecord]:
    """One record per (method, epsilon, alpha, seed[, lambda source]), canonically sorted."""
    if pair is None:
        pair = run_direct(plan)
    lambda0 = reference_lambda(plan, pair)
    jobs = [(eps, seed) for eps in plan.epsilons for seed in plan.seeds]
    records: list[SweepRecord] = []
    if plan.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=plan.jobs) as pool:
            futures = [pool.submit(_sweep_job, plan, pair.N.values, lambda0, e, s) for e, s in jobs]
            for fut in futures:
                records.extend(fut.result())
    else:
        for eps, seed in jobs:
            records.extend(_sweep_job(plan, pair.N.values, lambda0, eps, seed))
    records.sort(key=SweepRecord.sort_key)
    return records


# --- convergence -----------------------------------------------------------------------

@dataclass(frozen=True)
class ConvergenceResult:
    method: str
    lambda_source: str
    min_error: ConvergenceFit
    argmin_alpha: ConvergenceFit
    metric: str = "delta"


def convergence_from_records(records: Sequence[SweepRecord], metric: str = "delta") -> dict:
    """Fit ``f(eps) = min_alpha mean metric`` and ``g(eps) = argmin`` per (method, lambda source).

    Only strictly positive noise levels enter the fits.
    """
    groups = defaultdict(list)
    for rec in records:
        groups[(rec.method, rec.lambda_source)].append(rec)
    out = {}
    for key in sorted(groups, key=lambda k: (METHODS.index(k[0]), k[1])):
        recs = groups[key]
        eps_levels = sorted({r.epsilon for r in recs if r.epsilon > 0})
        if len(eps_levels) < 3:
            raise DomainError(f"{key}: need at least three positive noise levels, got {len(eps_levels)}")
        points = []
        for eps in eps_levels:
            best, alpha = min_over_alpha(recs, eps, metric)
            points.append((eps, best, alpha))
        f_fit = fit_loglog_slope(points)
        g_fit = fit_loglog_slope([(e, a, a) for e, _, a in points])
        out[key] = ConvergenceResult(key[0], key[1], f_fit, g_fit, metric)
    return out


def run_convergence(plan: ExperimentPlan, records: Optional[Sequence[SweepRecord]] = None,
                    metric: str = "delta") -> dict:
    if records is None:
        if sum(1 for e in plan.epsilons if e > 0) < 3:
            raise DomainError("convergence study needs at least three positive noise levels")
        records = run_sweep(plan)
    return convergence_from_records(records, metric)


# --- CSV -------------------------------------------------------------------------------

def write_sweep_csv(records: Sequence[SweepRecord], path, header: Sequence[str] = ()) -> None:
    with open(path, "w", newline="") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
        for rec in records:
            row = asdict(rec)
            writer.writerow([
                rec.method,
                format_float(rec.epsilon),
                format_float(rec.alpha),
                rec.seed,
                *(format_float(row[c]) for c in ("delta", "delta_rel_l2", "lambda_used", "lambda_abs_err")),
                rec.lambda_source,
                int(rec.ok),
            ])


def read_sweep_csv(path) -> list[SweepRecord]:
    def num(text):
        return float(text) if text != "" else math.nan

    with open(path, newline="") as fh:
        rows = csv.DictReader(line for line in fh if not line.startswith("#"))
        missing = set(SWEEP_COLUMNS[:8]) - set(rows.fieldnames or ())
        if missing:
            raise DomainError(f"{path}: missing columns {sorted(missing)}")
        return [
            SweepRecord(
                r["method"], num(r["epsilon"]), num(r["alpha"]), int(r["seed"]),
                num(r["delta"]), num(r["delta_rel_l2"]), num(r["lambda_used"]),
                num(r["lambda_abs_err"]), r.get("lambda_source") or ESTIMATED,
                r.get("ok", "1") not in ("0", "False", "false"),
            )
            for r in rows
        ]


def write_convergence_csv(results: dict, path, header: Sequence[str] = ()) -> None:
    """Curve points ``f(eps)``, ``g(eps)`` per group; fitted lines go into the header."""
    with open(path, "w", newline="") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        for res in results.values():
            fh.write(
                f"# fit method={res.method}, lambda_source={res.lambda_source}, metric={res.metric}, "
                f"slope_f={format_float(res.min_error.slope)}, intercept_f={format_float(res.min_error.intercept)}, "
                f"slope_g={format_float(res.argmin_alpha.slope)}, intercept_g={format_float(res.argmin_alpha.intercept)}\n"
            )
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["method", "lambda_source", "epsilon", "min_delta", "argmin_alpha", "sqrt_epsilon"])
        for res in results.values():
            for eps, best, alpha in res.min_error.points:
                writer.writerow([
                    res.method, res.lambda_source, format_float(eps), format_float(best),
                    format_float(alpha), format_float(math.sqrt(eps)),
                ])


# --- figure data -----------------------------------------------------------------------

def _reconstruction(plan: ExperimentPlan, pair: EigenPair, method: str, alpha: float,
                    eps: float, seed: int, lambda_override=None):
    fine = plan.inverse_grid
    N_eps = perturb(resample(pair.N, fine), NoiseSpec(eps, seed))
    res = solve(method, N_eps, InverseConfig(alpha, plan.b_threshold, lambda_override))
    return N_eps, res


def reproduce_figures(out_dir, quick: bool = False, jobs: int = 1, cache_dir=None) -> list[Path]:
    """Write the CSV data behind every figure of the numerical study into ``out_dir``.

    ``quick`` shrinks grids and seed counts for smoke testing.
    """
    from .inverse import write_inverse_csv
    from .grid import write_grid_function
    from .rates import BUILTIN_RATES

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    n_clean, n_noisy, n_small = (200, 50, 100) if quick else (1000, 100, 500)
    seeds = (0, 1) if quick else (0, 1, 2, 3, 4)
    common = dict(cache_dir=cache_dir, jobs=jobs)

    def emit(path: Path):
        written.append(path)
        logger.info("wrote %s", path)

    for name, spec in BUILTIN_RATES.items():
        plan = ExperimentPlan.noiseless(b_spec=spec, I_direct=n_clean, **common)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TailWarning)
            pair = run_direct(plan)
        path = out / f"direct_N_{name}.csv"
        write_grid_function(pair.N, path, [f"b={spec}, lambda0={format_float(pair.lambda0)}"], "N")
        emit(path)

        records = run_sweep(plan, pair)
        path = out / f"noiseless_delta_vs_alpha_{name}.csv"
        write_sweep_csv(records, path, plan.header_lines())
        emit(path)
        for method in METHODS:
            N_eps, res = _reconstruction(plan, pair, method, 1e-2, 0.0, 0)
            path = out / f"noiseless_reconstruction_{name}_{method}.csv"
            write_inverse_csv(res, N_eps, path, [f"b={spec}, epsilon=0"])
            emit(path)

    noisy = ExperimentPlan(epsilons=(0.01, 0.02, 0.05, 0.1), I_direct=n_noisy, seeds=seeds,
                           use_exact_lambda=True, **common)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TailWarning)
        pair = run_direct(noisy)
    records = run_sweep(noisy, pair)
    path = out / "noisy_delta_vs_alpha_const.csv"
    write_sweep_csv(records, path, noisy.header_lines())
    emit(path)
    path = out / "noisy_convergence_const.csv"
    write_convergence_csv(convergence_from_records(records), path, noisy.header_lines())
    emit(path)
    for eps in (0.01, 0.1):
        for method in ("filter", "qr", "mixed"):
            best = min_over_alpha([r for r in records if r.method == method and r.lambda_source == ESTIMATED], eps)
            N_eps, res = _reconstruction(noisy, pair, method, best[1], eps, 0)
            path = out / f"noisy_reconstruction_const_{method}_eps{format_float(eps)}.csv"
            write_inverse_csv(res, N_eps, path, [f"b={noisy.b_spec}, epsilon={format_float(eps)}, seed=0"])
            emit(path)

    small = ExperimentPlan.small_noise(I_direct=n_small, seeds=seeds, methods=("filter",), **common)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TailWarning)
        pair = run_direct(small)
    records = run_sweep(small, pair)
    path = out / "small_noise_convergence_filter.csv"
    write_convergence_csv(convergence_from_records(records), path, small.header_lines())
    emit(path)
    return written
