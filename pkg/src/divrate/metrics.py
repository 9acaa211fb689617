"""Reconstruction error functionals and convergence-curve fitting.

``delta_metric`` is the squared-over-unsquared functional
``sum (B N_eps - H)^2 / sqrt(sum N_eps^2)`` built on plain sequence (l2)
norms, i.e. without grid-spacing weights; ``relative_l2`` is the ordinary
relative error ``||B N_eps - H|| / ||N_eps||`` (spacing cancels there).
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateDataError, DomainError
from .grid import GridFunction, check_same_grid


@dataclass(frozen=True)
class ErrorReport:
    delta: float
    delta_rel_l2: float
    lambda_abs_err: float = math.nan


@dataclass(frozen=True)
class ConvergenceFit:
    slope: float
    intercept: float
    points: tuple

    def predict(self, epsilon: float) -> float:
        return math.exp(self.intercept) * epsilon**self.slope


def _residual(B_true: GridFunction, N_eps: GridFunction, H: GridFunction):
    check_same_grid(B_true, N_eps, H)
    denom = float(np.sqrt(np.sum(N_eps.values**2)))
    if denom == 0:
        raise DegenerateDataError("||N_eps|| is zero")
    return B_true.values * N_eps.values - H.values, denom


def delta_metric(B_true: GridFunction, N_eps: GridFunction, H: GridFunction) -> float:
    """``||B N_eps - H||^2 / ||N_eps||`` with sequence norms."""
    r, denom = _residual(B_true, N_eps, H)
    return float(np.sum(r**2) / denom)


def relative_l2(B_true: GridFunction, N_eps: GridFunction, H: GridFunction) -> float:
    r, denom = _residual(B_true, N_eps, H)
    return float(np.sqrt(np.sum(r**2)) / denom)


def error_report(B_true, N_eps, H, lambda_used=math.nan, lambda0=math.nan) -> ErrorReport:
    return ErrorReport(
        delta_metric(B_true, N_eps, H),
        relative_l2(B_true, N_eps, H),
        abs(lambda_used - lambda0),
    )


def min_over_alpha(records: Iterable, epsilon: float, metric: str = "delta") -> tuple[float, float]:
    """Smallest seed-averaged ``metric`` among records at ``epsilon`` and the alpha attaining it.

    Records with ``ok`` false are ignored; ties go to the smaller alpha.
    """
    by_alpha = defaultdict(list)
    for rec in records:
        if math.isclose(rec.epsilon, epsilon, rel_tol=1e-12, abs_tol=1e-300) and getattr(rec, "ok", True):
            by_alpha[rec.alpha].append(getattr(rec, metric))
    if not by_alpha:
        raise DomainError(f"no records for epsilon={epsilon}")
    best_alpha, best = None, math.inf
    for alpha in sorted(by_alpha):
        value = float(np.mean(by_alpha[alpha]))
        if value < best:
            best_alpha, best = alpha, value
    if best_alpha is None:
        raise DomainError(f"all records at epsilon={epsilon} are non-finite")
    return best, best_alpha


def fit_loglog_slope(points: Sequence[Sequence[float]]) -> ConvergenceFit:
    """Least-squares line through ``(log eps, log value)``.

    ``points`` holds ``(epsilon, value)`` or ``(epsilon, value, argmin_alpha)``
    tuples; they are stored sorted by epsilon.
    """
    pts = tuple(sorted((tuple(p) for p in points), key=lambda p: p[0]))
    if len(pts) < 3:
        raise DomainError("need at least three points to fit a slope")
    eps = np.array([p[0] for p in pts], dtype=float)
    val = np.array([p[1] for p in pts], dtype=float)
    if np.any(eps <= 0) or np.any(val <= 0) or not np.all(np.isfinite(val)):
        raise DomainError("log-log fit needs strictly positive, finite entries")
    slope, intercept = np.polyfit(np.log(eps), np.log(val), 1)
    return ConvergenceFit(float(slope), float(intercept), pts)
