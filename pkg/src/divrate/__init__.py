"""Recover size-dependent cell division rates from stable size distributions.

The package solves the direct eigenproblem for a size-structured dividing
population, then inverts it from noisy data with quasi-reversibility,
filtering, or a mix of both.
"""
from .errors import ConvergenceError, DegenerateDataError, DivrateError, DomainError, GridMismatchError
from .grid import Grid, GridFunction, integrate, integrate_x, resample
from .rates import BUILTIN_RATES, DivisionRate, parse_rate
from .direct import DirectConfig, EigenPair, exact_constant_B, solve_eigenpair
from .dilation import (
    DilationSolution,
    kernel_witness,
    series_H1,
    series_H2,
    solve_dense_oracle,
    solve_from_infinity,
    solve_from_zero,
)
from .regularization import LambdaEstimate, mollifier_hat, mollify, regularized_derivative
from .noise import NoiseSpec, perturb
from .metrics import ConvergenceFit, ErrorReport, delta_metric, fit_loglog_slope, min_over_alpha, relative_l2
from .inverse import METHODS, InverseConfig, InverseResult, solve
from .experiments import ExperimentPlan, SweepRecord, run_convergence, run_direct, run_sweep

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError", "DegenerateDataError", "DivrateError", "DomainError", "GridMismatchError",
    "Grid", "GridFunction", "integrate", "integrate_x", "resample",
    "BUILTIN_RATES", "DivisionRate", "parse_rate",
    "DirectConfig", "EigenPair", "exact_constant_B", "solve_eigenpair",
    "DilationSolution", "kernel_witness", "series_H1", "series_H2",
    "solve_dense_oracle", "solve_from_infinity", "solve_from_zero",
    "LambdaEstimate", "mollifier_hat", "mollify", "regularized_derivative",
    "NoiseSpec", "perturb",
    "ConvergenceFit", "ErrorReport", "delta_metric", "fit_loglog_slope", "min_over_alpha", "relative_l2",
    "METHODS", "InverseConfig", "InverseResult", "solve",
    "ExperimentPlan", "SweepRecord", "run_convergence", "run_direct", "run_sweep",
]
