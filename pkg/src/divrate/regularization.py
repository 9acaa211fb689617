"""Fourier mollifier, regularized derivative and the growth-rate estimators.

The mollifier is given by its symbol ``rho_hat(xi) = 1/sqrt(1 + alpha^2 xi^2)``.
Data are zero-padded to at least twice their length before the FFT so the
implicit periodization does not wrap the right end onto the origin.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDataError, DomainError
from .grid import GridFunction, check_same_grid

RATIO_PLAIN = "ratio_plain"
RATIO_QR = "ratio_qr"
RATIO_FILTER = "ratio_filter_discrete"
RATIO_MIXED = "ratio_mixed"
OVERRIDE = "override"


@dataclass(frozen=True)
class LambdaEstimate:
    value: float
    variant: str

    @property
    def admissible(self) -> bool:
        return self.value > 0


def mollifier_hat(alpha: float, xi):
    """Fourier symbol of the mollifier; scalar or array ``xi``."""
    return 1.0 / np.sqrt(1.0 + (alpha * np.asarray(xi, dtype=float)) ** 2)


def _padded_length(n: int) -> int:
    m = 1
    while m < 2 * n:
        m *= 2
    return m


def _frequencies(m: int, dx: float) -> np.ndarray:
    return 2.0 * np.pi * np.fft.fftfreq(m, d=dx)


def spectral_filter(values, dx: float, alpha: float, derivative: bool, pad: bool = True):
    """Apply ``rho_hat`` (times ``i xi`` when ``derivative``) through the DFT.

    With ``pad=False`` the input is treated as one period of a periodic
    sequence.  Forward transform uses the ``exp(-i xi x)`` kernel.
    """
    if alpha < 0:
        raise DomainError("alpha must be nonnegative")
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    m = _padded_length(n) if pad else n
    xi = _frequencies(m, dx)
    symbol = mollifier_hat(alpha, xi).astype(complex)
    if derivative:
        symbol *= 1j * xi
        if m % 2 == 0:
            symbol[m // 2] = 0.0
    out = np.fft.ifft(symbol * np.fft.fft(values, m))[:n]
    scale = np.linalg.norm(values)
    if np.max(np.abs(out.imag), initial=0.0) > 1e-10 * max(scale, 1.0):
        raise AssertionError("spectral filter produced a non-real result")
    return out.real


def regularized_derivative(N: GridFunction, alpha: float) -> GridFunction:
    """Mollified derivative ``F^{-1}(i xi rho_hat(xi) F N)`` with the origin value set to 0."""
    d = spectral_filter(N.values, N.grid.dx, alpha, derivative=True)
    d[0] = 0.0
    return N.with_values(d)


def mollify(N: GridFunction, alpha: float) -> GridFunction:
    """Smoothed data ``F^{-1}(rho_hat F N)`` with the same padding as the derivative."""
    return N.with_values(spectral_filter(N.values, N.grid.dx, alpha, derivative=False))


def _moments(N: GridFunction):
    x = N.grid.nodes
    return float(np.sum(N.values)), float(np.dot(x, N.values))


def lambda_ratio_plain(N: GridFunction) -> LambdaEstimate:
    """``int N / int x N``."""
    m0, m1 = _moments(N)
    if not m1 > 0:
        raise DegenerateDataError("first moment of N must be positive")
    return LambdaEstimate(m0 / m1, RATIO_PLAIN)


def lambda_ratio_qr(N: GridFunction, alpha: float) -> LambdaEstimate:
    """``int N / (int x N + alpha/4 int N)``, the choice compatible with the transport term."""
    m0, m1 = _moments(N)
    denom = m1 + 0.25 * alpha * m0
    if not denom > 0:
        raise DegenerateDataError("denominator of the quasi-reversibility ratio must be positive")
    return LambdaEstimate(m0 / denom, RATIO_QR)


def lambda_ratio_filter(N: GridFunction, dN_alpha: GridFunction) -> LambdaEstimate:
    """``-sum x_i dN_i / sum x_i N_i``.

    A zero numerator gives a zero (inadmissible) estimate rather than an error.
    """
    check_same_grid(N, dN_alpha)
    x = N.grid.nodes
    denom = float(np.dot(x, N.values))
    if denom == 0:
        raise DegenerateDataError("first moment of N must be nonzero")
    return LambdaEstimate(-float(np.dot(x, dN_alpha.values)) / denom, RATIO_FILTER)


def lambda_ratio_mixed(N_smoothed: GridFunction, alpha: float) -> LambdaEstimate:
    """Quasi-reversibility ratio evaluated on mollified data."""
    est = lambda_ratio_qr(N_smoothed, alpha)
    return LambdaEstimate(est.value, RATIO_MIXED)
