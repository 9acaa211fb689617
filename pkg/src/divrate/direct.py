"""Dominant eigenpair of the cell-division operator.

The time-dependent model is marched with the upwind finite-volume scheme
(implicit loss, explicit division gain) and renormalized after every step,
i.e. the power method applied to the one-step evolution matrix.  For a
constant division rate the exact eigenfunction is available as a Dirichlet
series and serves as an oracle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, DomainError, GridMismatchError
from .grid import Grid, GridFunction, check_same_grid, integrate, integrate_x


@dataclass(frozen=True)
class DirectConfig:
    grid: Grid
    theta: float = 1.0
    stop_tol: float = 1e-10
    max_iters: int = 200_000

    def __post_init__(self):
        if not 0 < self.theta <= 1:
            raise DomainError(f"CFL ratio theta must lie in (0, 1], got {self.theta}")
        if not self.stop_tol > 0:
            raise DomainError("stop_tol must be positive")

    @property
    def dt(self) -> float:
        return self.theta * self.grid.dx


@dataclass
class EigenPair:
    """Stable size distribution ``N`` (unit mass) and Malthus parameter ``lambda0``.

    ``lambda0`` is the moment ratio ``int N / int x N`` of the converged
    distribution.  The power-method growth-rate estimate
    ``log(sum n^{k+1} / sum n^k) / dt`` carries an O(dt) bias from the
    semi-implicit time step and is kept in ``diagnostics`` together with the
    one-step growth factor.
    """

    N: GridFunction
    lambda0: float
    iterations: int
    final_residual: float
    diagnostics: dict = field(default_factory=dict)


def _gain(bn: np.ndarray) -> np.ndarray:
    """``B_{2i-1} n_{2i-1} + 2 B_{2i} n_{2i} + B_{2i+1} n_{2i+1}`` with zero extension."""
    n = bn.shape[0]
    ext = np.zeros(2 * n + 1)
    ext[:n] = bn
    i = np.arange(n)
    out = ext[2 * i - 1] + 2.0 * ext[2 * i] + ext[2 * i + 1]
    out[0] = 0.0
    return out


def direct_step(n: GridFunction, B: GridFunction, cfg: DirectConfig) -> GridFunction:
    """Advance the density by one time step of the upwind scheme.

    Transport and division gain are explicit; the loss term ``B_i n_i`` is
    taken at the new time level, so each node only needs a scalar division.
    """
    grid = _config_grid(cfg, n, B)
    if np.any(B.values < 0):
        raise DomainError("division rate must be nonnegative")
    return n.with_values(_step(n.values, B.values, cfg.dt, grid.dx))


def _config_grid(cfg: DirectConfig, *funcs: GridFunction) -> Grid:
    grid = check_same_grid(*funcs)
    if not grid.same_as(cfg.grid):
        raise GridMismatchError(f"data grid {grid} differs from configured grid {cfg.grid}")
    return grid


def _step(n, b, dt, dx):
    # multiplied through by dt so that theta = 1, B = 0 is an exact shift
    theta = dt / dx
    gain = _gain(b * n)
    new = np.empty_like(n)
    new[0] = 0.0
    new[1:] = ((1.0 - theta) * n[1:] + theta * n[:-1] + dt * gain[1:]) / (1.0 + dt * b[1:])
    return new


def initial_iterate(grid: Grid) -> np.ndarray:
    """Positive start vector ``x e^{-x}`` scaled to unit mass."""
    x = grid.nodes
    n0 = x * np.exp(-x)
    return n0 / (grid.dx * n0.sum())


def solve_eigenpair(B: GridFunction, cfg: DirectConfig) -> EigenPair:
    """Power iteration on the one-step evolution operator.

    Stops once the change of the per-step growth factor, divided by ``dt``,
    falls below ``cfg.stop_tol``.

    Raises
    ------
    ConvergenceError
        If ``B`` vanishes identically or ``cfg.max_iters`` is exhausted.
    """
    grid = _config_grid(cfg, B)
    b = B.values
    if np.any(b < 0):
        raise DomainError("division rate must be nonnegative")
    if not np.any(b > 0):
        raise ConvergenceError("B is identically zero: no division, no stable distribution")

    dt, dx = cfg.dt, grid.dx
    n = initial_iterate(grid)
    growth_prev = math.nan
    residual = math.inf
    for k in range(1, cfg.max_iters + 1):
        new = _step(n, b, dt, dx)
        mass_old, mass_new = n[1:].sum(), new[1:].sum()
        if not mass_new > 0:
            raise ConvergenceError("iterate lost all mass", residual, k)
        growth = mass_new / mass_old
        n = new / (dx * new.sum())
        residual = abs(growth - growth_prev) / dt
        growth_prev = growth
        if residual < cfg.stop_tol:
            break
    else:
        raise ConvergenceError(
            f"power iteration did not reach stop_tol={cfg.stop_tol} in {cfg.max_iters} steps "
            f"(last residual {residual:.3e})",
            residual,
            cfg.max_iters,
        )

    N = GridFunction(grid, n)
    moment_ratio = integrate(N) / integrate_x(N)
    diagnostics = {
        "growth_factor": growth,
        "lambda_log_ratio": math.log(growth) / dt,
        "lambda_moment_ratio": moment_ratio,
        "dt": dt,
        "theta": cfg.theta,
    }
    return EigenPair(N, moment_ratio, k, residual, diagnostics)


def stationary_residual(pair: EigenPair, B: GridFunction) -> np.ndarray:
    """Residual of the fixed-point equation satisfied by the scheme's eigenvector.

    With growth factor ``mu`` the converged vector solves
    ``(N_i - N_{i-1})/dx + ((mu - 1)/dt + mu B_i) N_i = gain_i`` for ``i >= 1``
    (up to the normalization, which cancels).
    """
    N, b = pair.N.values, B.values
    dx, dt, mu = pair.N.grid.dx, pair.diagnostics["dt"], pair.diagnostics["growth_factor"]
    lhs = mu * (N[1:] / dt + b[1:] * N[1:])
    rhs = N[1:] / dt - (N[1:] - N[:-1]) / dx + _gain(b * N)[1:]
    return lhs - rhs


def series_coefficients(n_terms: int) -> np.ndarray:
    """Coefficients ``c_n = (-1)^n prod_{k=1}^n 2/(2^k - 1)`` of the exact eigenfunction."""
    c = np.empty(n_terms)
    c[0] = 1.0
    for n in range(1, n_terms):
        c[n] = -2.0 * c[n - 1] / (2.0**n - 1.0)
    return c


def exact_constant_B(grid: Grid, B: float, n_terms: int = 60) -> GridFunction:
    """Exact stable distribution for a constant division rate.

    ``N(x) ∝ sum_n c_n exp(-2^{n+1} B x)`` with :func:`series_coefficients`;
    this series vanishes at ``x = 0`` and solves
    ``N' + 2 B N = 4 B N(2x)`` (so ``lambda0 = B``).  Terms with ``|c_n|`` below
    1e-16 are dropped.  Normalized so that ``dx * sum N_i = 1``.
    """
    if not B > 0:
        raise DomainError("constant division rate must be positive")
    if n_terms < 1:
        raise DomainError("n_terms must be >= 1")
    c = series_coefficients(n_terms)
    keep = np.abs(c) >= 1e-16
    keep[0] = True
    x = grid.nodes
    vals = np.zeros_like(x)
    for n in np.flatnonzero(keep):
        vals += c[n] * np.exp(-(2.0 ** (n + 1)) * B * x)
    vals /= grid.dx * vals.sum()
    return GridFunction(grid, vals)


def direct_error_l1(N: GridFunction, N_exact: GridFunction) -> float:
    """Relative l1 distance ``sum|N - N_exact| / sum|N_exact|``."""
    check_same_grid(N, N_exact)
    denom = np.abs(N_exact.values).sum()
    if denom == 0:
        raise DomainError("reference solution is identically zero")
    return float(np.abs(N.values - N_exact.values).sum() / denom)
