"""The dilation equation ``4 H(2x) - H(x) = L(x)``.

Discrete solvers:

* :func:`solve_from_zero` marches upward from ``x = 0`` on the rescaled form
  ``4 H(y) - H(y/2) = L(y/2)`` and selects the solution that is square
  integrable near the origin.
* :func:`solve_from_infinity` marches downward from the right end assuming
  ``H = 0`` beyond the domain.
* :func:`solve_dense_oracle` assembles the upward equations as a dense system.

:func:`sweep` is the common upward kernel; a nonnegative ``transport``
coefficient adds the upwind term ``transport * (H_i - H_{i-1})`` used by the
quasi-reversibility scheme.  The series representations and the kernel
witnesses work on callables and are meant as oracles.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.signal import lfilter

from .errors import ConvergenceError, DivrateError, DomainError
from .grid import GridFunction, half_index_values

FROM_ZERO = "from_zero"
FROM_INFINITY = "from_infinity"
DENSE_ORACLE = "dense_oracle"


@dataclass
class DilationSolution:
    H: GridFunction
    strategy: str
    residual_norm: float
    flags: dict = field(default_factory=dict)


def sweep(L: np.ndarray, transport: float = 0.0) -> np.ndarray:
    """Solve ``transport*(H_i - H_{i-1}) + 4 H_i = H_{i/2} + L_{i/2}`` for ``i >= 1``, ``H_0 = 0``.

    Half indices follow the odd-average convention.
    """
    L = np.asarray(L, dtype=float)
    R = np.zeros_like(L)
    R[1:] = half_index_values(L, np.arange(1, L.shape[0]))
    return solve_rhs(R, transport)


def solve_rhs(R: np.ndarray, transport: float = 0.0) -> np.ndarray:
    """Solve ``transport*(H_i - H_{i-1}) + 4 H_i - H_{i/2} = R_i`` for ``i >= 1``, ``H_0 = 0``.

    The unknowns of the block ``(m, 2m]`` only reference half indices
    ``<= m``, so the sweep proceeds by dyadic blocks; inside a block the
    transport term is a first-order linear recurrence evaluated with
    :func:`scipy.signal.lfilter`.
    """
    R = np.asarray(R, dtype=float)
    if transport < 0:
        raise DomainError("transport coefficient must be nonnegative")
    n = R.shape[0]
    H = np.zeros(n)
    if n == 1:
        return H
    # i = 1 references H_1 itself through the odd-index average
    H[1] = R[1] / (transport + 3.5)
    scale = 1.0 / (transport + 4.0)
    ratio = transport * scale
    lo = 1
    while lo < n - 1:
        hi = min(2 * lo, n - 1)
        idx = np.arange(lo + 1, hi + 1)
        forcing = scale * (half_index_values(H, idx) + R[idx])
        if ratio == 0.0:
            H[idx] = forcing
        else:
            H[idx], _ = lfilter([1.0], [1.0, -ratio], forcing, zi=[ratio * H[lo]])
        lo = hi
    return H


def sweep_residual(H: np.ndarray, L: np.ndarray, transport: float = 0.0) -> np.ndarray:
    """Residual of the upward equations at ``i = 1..I``."""
    H = np.asarray(H, dtype=float)
    idx = np.arange(1, H.shape[0])
    return (
        transport * (H[1:] - H[:-1])
        + 4.0 * H[1:]
        - half_index_values(H, idx)
        - half_index_values(np.asarray(L, dtype=float), idx)
    )


def dilation_operator(H: np.ndarray, transport: float = 0.0) -> np.ndarray:
    """Left-hand side of the upward equations; the entry at 0 is ``H_0``.

    Applying the operator to a sampled ``H*`` gives a right-hand side ``R`` for
    which :func:`solve_rhs` returns ``H*`` exactly (manufactured solutions).
    """
    H = np.asarray(H, dtype=float)
    out = np.empty_like(H)
    out[0] = H[0]
    idx = np.arange(1, H.shape[0])
    out[1:] = transport * (H[1:] - H[:-1]) + 4.0 * H[1:] - half_index_values(H, idx)
    return out


def _coerce_origin(L: GridFunction) -> tuple[np.ndarray, bool]:
    vals = L.values.copy()
    coerced = vals[0] != 0.0
    vals[0] = 0.0
    return vals, bool(coerced)


def solve_from_zero(L: GridFunction) -> DilationSolution:
    """Upward solve (strategy 1).  A nonzero ``L_0`` is replaced by 0 and flagged."""
    vals, coerced = _coerce_origin(L)
    H = sweep(vals)
    res = float(np.linalg.norm(sweep_residual(H, vals)))
    return DilationSolution(L.with_values(H), FROM_ZERO, res, {"l0_coerced": coerced})


def solve_from_infinity(L: GridFunction) -> DilationSolution:
    """Downward solve (strategy 2).

    ``H_i = 2 H_{2i} + H_{2i+1} + H_{2i-1} - L_i`` for ``i = I..2`` with ``H_j = 0``
    past the grid, then ``H_0 = 0`` and ``H_1 = 4 H_2 - L_1``.  The closure at
    the origin is only meaningful when ``H_1`` and ``H_2`` come out small; their
    magnitudes are reported in ``flags``.
    """
    vals = L.values
    n = vals.shape[0]
    ext = np.zeros(2 * n + 2)
    for i in range(n - 1, 1, -1):
        ext[i] = 2.0 * ext[2 * i] + ext[2 * i + 1] + ext[2 * i - 1] - vals[i]
    if n > 2:
        ext[1] = 4.0 * ext[2] - vals[1]
    ext[0] = 0.0
    H = ext[:n].copy()
    res = float(np.linalg.norm(infinity_residual(H, vals)))
    flags = {"h1": abs(H[1]) if n > 1 else 0.0, "h2": abs(H[2]) if n > 2 else 0.0}
    return DilationSolution(L.with_values(H), FROM_INFINITY, res, flags)


def infinity_residual(H: np.ndarray, L: np.ndarray) -> np.ndarray:
    """Residual of the downward recurrence at ``i = 2..I``."""
    n = H.shape[0]
    ext = np.zeros(2 * n + 2)
    ext[:n] = H
    i = np.arange(2, n)
    return H[2:] - (2.0 * ext[2 * i] + ext[2 * i + 1] + ext[2 * i - 1] - L[2:])


def solve_dense_oracle(L: GridFunction) -> DilationSolution:
    """Assemble the upward equations as an ``(I+1) x (I+1)`` system and solve it by LU."""
    vals, coerced = _coerce_origin(L)
    n = vals.shape[0]
    A = np.zeros((n, n))
    rhs = np.zeros(n)
    A[0, 0] = 1.0
    for i in range(1, n):
        A[i, i] += 4.0
        if i % 2 == 0:
            A[i, i // 2] -= 1.0
        else:
            A[i, (i - 1) // 2] -= 0.5
            A[i, (i + 1) // 2] -= 0.5
    idx = np.arange(1, n)
    rhs[1:] = half_index_values(vals, idx)
    try:
        H = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:
        raise DivrateError(f"dense dilation system is singular: {exc}") from exc
    res = float(np.linalg.norm(sweep_residual(H, vals)))
    return DilationSolution(L.with_values(H), DENSE_ORACLE, res, {"l0_coerced": coerced})


# --- continuous representations ---------------------------------------------------

def series_H1(L: Callable[[float], float], x: float, tol: float = 1e-14) -> float:
    """``sum_{n>=1} 4^{-n} L(2^{-n} x)``, the solution that is regular at the origin."""
    total = 0.0
    for n in range(1, 201):
        term = 4.0**-n * L(x * 2.0**-n)
        total += term
        if abs(term) < tol and n >= 2:
            return total
    raise ConvergenceError(f"series H1 did not converge at x={x}", abs(term), 200)


def series_H2(L: Callable[[float], float], x: float, tol: float = 1e-14) -> float:
    """``-sum_{n>=0} 4^n L(2^n x)``, the solution that is regular at infinity.

    Three consecutive increments below ``tol`` end the sum; ten consecutive
    growing increments are reported as divergence.
    """
    total = 0.0
    small = growing = 0
    prev = math.inf
    for n in range(0, 201):
        term = 4.0**n * L(x * 2.0**n)
        if not math.isfinite(term):
            raise ConvergenceError(f"series H2 overflowed at x={x}", math.inf, n)
        total -= term
        small = small + 1 if abs(term) < tol else 0
        growing = growing + 1 if abs(term) > abs(prev) else 0
        if small >= 3:
            return total
        if growing >= 10:
            raise ConvergenceError(f"series H2 diverges at x={x}", abs(term), n)
        prev = term
    raise ConvergenceError(f"series H2 did not converge at x={x}", abs(term), 200)


def kernel_witness(f_period: Callable[[float], float], x: float) -> float:
    """``f(log x) / x^2``; solves the homogeneous equation when ``f`` is log(2)-periodic."""
    if not x > 0:
        raise DomainError("kernel witnesses are defined for x > 0")
    return f_period(math.log(x)) / (x * x)
