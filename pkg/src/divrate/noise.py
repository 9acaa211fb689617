"""Reproducible additive measurement noise.

Draws come from the raw 64-bit output of numpy's PCG64 bit generator, whose
stream is fixed for a given seed on every platform.  The conversion to
doubles (top 53 bits times 2**-53) is done here rather than through
``Generator.uniform`` so that outputs do not depend on numpy's distribution
code.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .grid import GridFunction


@dataclass(frozen=True)
class NoiseSpec:
    epsilon: float
    seed: int = 0

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise DomainError(f"noise amplitude must be nonnegative, got {self.epsilon}")


def centered_uniform(n: int, seed: int) -> np.ndarray:
    """``n`` i.i.d. draws from U[-1/2, 1/2) for the given seed."""
    raw = np.random.PCG64(seed).random_raw(n)
    return (raw >> np.uint64(11)).astype(np.float64) * 2.0**-53 - 0.5


def perturb(N: GridFunction, spec: NoiseSpec) -> GridFunction:
    """``max(N + epsilon r, 0)`` with ``r ~ U[-1/2, 1/2]`` and the origin forced to 0."""
    if spec.epsilon == 0:
        return N.copy()
    r = centered_uniform(N.grid.n_points, spec.seed)
    out = np.maximum(N.values + spec.epsilon * r, 0.0)
    out[0] = 0.0
    return N.with_values(out)


def relative_l2_noise(N: GridFunction, N_eps: GridFunction) -> float:
    """Realized ``||N_eps - N|| / ||N||`` (sequence norms)."""
    denom = np.linalg.norm(N.values)
    return float(np.linalg.norm(N_eps.values - N.values) / denom) if denom > 0 else float("nan")
