"""Recovery of the division rate from a (noisy) stable distribution.

Every method first reconstructs ``H = B N`` by solving a discrete dilation
equation upward from the origin, then divides by the data where it is large
enough.  The methods differ in how the derivative of the data is handled:

``brute``   central differences, no regularization
``filter``  mollified spectral derivative
``qr``      forward differences plus the transport term ``alpha dH/dx``
``mixed``   mollified derivative and data plus the transport term
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import dilation
from .errors import DomainError
from .grid import GridFunction, check_same_grid, format_float
from .regularization import (
    OVERRIDE,
    LambdaEstimate,
    lambda_ratio_filter,
    lambda_ratio_mixed,
    lambda_ratio_plain,
    lambda_ratio_qr,
    mollify,
    regularized_derivative,
)

METHODS = ("brute", "filter", "qr", "mixed")


@dataclass(frozen=True)
class InverseConfig:
    alpha: float = 0.0
    b_threshold: float = 0.01
    lambda_override: Optional[float] = None

    def __post_init__(self):
        if not self.alpha >= 0:
            raise DomainError(f"alpha must be nonnegative, got {self.alpha}")
        if not self.b_threshold > 0:
            raise DomainError("b_threshold must be positive")


@dataclass
class InverseResult:
    """Reconstruction output.  ``B`` holds NaN where the data are below threshold."""

    H: GridFunction
    B: GridFunction
    lambda_used: LambdaEstimate
    method: str
    alpha: float
    L: GridFunction = field(repr=False, default=None)
    transport: float = 0.0

    def residual(self) -> np.ndarray:
        """Residual of the discrete equation this method solved."""
        return dilation.sweep_residual(self.H.values, self.L.values, self.transport)


def _lambda(estimate, cfg: InverseConfig) -> LambdaEstimate:
    """The override when given, else ``estimate()`` (not evaluated otherwise)."""
    if cfg.lambda_override is None:
        return estimate()
    return LambdaEstimate(float(cfg.lambda_override), OVERRIDE)


def recover_B(H: GridFunction, N_eps: GridFunction, b_threshold: float) -> GridFunction:
    """``H / N_eps`` where ``N_eps > b_threshold``; NaN (absent) elsewhere."""
    check_same_grid(H, N_eps)
    mask = N_eps.values > b_threshold
    B = np.full(H.values.shape, math.nan)
    B[mask] = H.values[mask] / N_eps.values[mask]
    return H.with_values(B)


def build_L_filter(N_eps: GridFunction, alpha: float, lambda_override: Optional[float] = None):
    """Right side ``dN_alpha + lambda N_eps`` (with ``L_0 = 0``) and the lambda used."""
    dN = regularized_derivative(N_eps, alpha)
    if lambda_override is None:
        lam = lambda_ratio_filter(N_eps, dN)
    else:
        lam = LambdaEstimate(float(lambda_override), OVERRIDE)
    L = dN + lam.value * N_eps
    L.values[0] = 0.0
    return L, lam


def _finish(N_eps, H, L, lam, method, cfg, transport=0.0) -> InverseResult:
    H = N_eps.with_values(H)
    return InverseResult(
        H=H,
        B=recover_B(H, N_eps, cfg.b_threshold),
        lambda_used=lam,
        method=method,
        alpha=cfg.alpha,
        L=L,
        transport=transport,
    )


def solve_filter(N_eps: GridFunction, cfg: InverseConfig) -> InverseResult:
    L, lam = build_L_filter(N_eps, cfg.alpha, cfg.lambda_override)
    sol = dilation.solve_from_zero(L)
    return _finish(N_eps, sol.H.values, L, lam, "filter", cfg)


def forward_difference(N: GridFunction) -> np.ndarray:
    """``(N_{i+1} - N_i)/dx`` with ``N_{I+1} = 0``."""
    v = N.values
    return np.diff(np.append(v, 0.0)) / N.grid.dx


def central_difference(N: GridFunction) -> np.ndarray:
    """Second-order central differences, one-sided second order at both ends."""
    return np.gradient(N.values, N.grid.dx, edge_order=2)


def solve_qr(N_eps: GridFunction, cfg: InverseConfig) -> InverseResult:
    """Quasi-reversibility: ``(alpha/dx)(H_i - H_{i-1}) + 4 H_i = H_{i/2} + L_{i/2}``."""
    lam = _lambda(lambda: lambda_ratio_qr(N_eps, cfg.alpha), cfg)
    L = N_eps.with_values(lam.value * N_eps.values + forward_difference(N_eps))
    transport = cfg.alpha / N_eps.grid.dx
    H = dilation.sweep(L.values, transport)
    return _finish(N_eps, H, L, lam, "qr", cfg, transport)


def solve_brute(N_eps: GridFunction, cfg: InverseConfig) -> InverseResult:
    """Unregularized reconstruction; ``cfg.alpha`` is recorded but not used."""
    lam = _lambda(lambda: lambda_ratio_plain(N_eps), cfg)
    L = N_eps.with_values(lam.value * N_eps.values + central_difference(N_eps))
    H = dilation.sweep(L.values, 0.0)
    return _finish(N_eps, H, L, lam, "brute", cfg)


def solve_mixed(N_eps: GridFunction, cfg: InverseConfig) -> InverseResult:
    """Mollified right side combined with the quasi-reversibility transport term."""
    smooth = mollify(N_eps, cfg.alpha)
    dN = regularized_derivative(N_eps, cfg.alpha)
    lam = _lambda(lambda: lambda_ratio_mixed(smooth, cfg.alpha), cfg)
    L = dN + lam.value * smooth
    transport = cfg.alpha / N_eps.grid.dx
    H = dilation.sweep(L.values, transport)
    return _finish(N_eps, H, L, lam, "mixed", cfg, transport)


SOLVERS = {
    "brute": solve_brute,
    "filter": solve_filter,
    "qr": solve_qr,
    "mixed": solve_mixed,
}


def solve(method: str, N_eps: GridFunction, cfg: InverseConfig) -> InverseResult:
    try:
        solver = SOLVERS[method]
    except KeyError:
        raise DomainError(f"unknown method {method!r}; choose from {', '.join(METHODS)}") from None
    return solver(N_eps, cfg)


def write_inverse_csv(result: InverseResult, N_eps: GridFunction, path, header=()) -> None:
    """``x,N_eps,H,B`` table; absent ``B`` entries are left empty."""
    with open(path, "w", newline="") as fh:
        fh.write(
            f"# method={result.method}, alpha={format_float(result.alpha)}, "
            f"lambda={format_float(result.lambda_used.value)}, lambda_variant={result.lambda_used.variant}\n"
        )
        for line in header:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["x", "N_eps", "H", "B"])
        for row in zip(N_eps.grid.nodes, N_eps.values, result.H.values, result.B.values):
            writer.writerow([format_float(v) for v in row])
