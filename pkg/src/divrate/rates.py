"""Division-rate descriptors.

Three builtin families cover the test rates used in the experiments::

    const:<v>                                  B(x) = v
    jump:<v1>:<v2>:<x_jump>                    B(x) = v1 for x < x_jump, v2 afterwards
    gauss-bump:<base>:<amp>:<center>:<width>   B(x) = base + amp * exp(-width * (x - center)**2)

``width`` multiplies the squared offset, so ``gauss-bump:1:1:2:8`` is
``1 + exp(-8 (x - 2)^2)``.  Any other string is treated as the path of an
``x,value`` CSV file, linearly interpolated and held constant past its last node.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import DomainError
from .grid import Grid, GridFunction, read_grid_function

BUILTIN_RATES = {
    "const": "const:1",
    "jump": "jump:1:5:2",
    "bump": "gauss-bump:1:1:2:8",
}


@dataclass(frozen=True)
class DivisionRate:
    """A named, vectorized division rate ``B(x) >= 0``."""

    spec: str
    func: Callable[[np.ndarray], np.ndarray]
    constant: float | None = None

    def __call__(self, x):
        return np.asarray(self.func(np.asarray(x, dtype=float)), dtype=float)

    def on(self, grid: Grid) -> GridFunction:
        return grid.sample(self)


def parse_rate(spec: str) -> DivisionRate:
    """Build a :class:`DivisionRate` from its descriptor string."""
    spec = BUILTIN_RATES.get(spec, spec)
    kind, _, rest = spec.partition(":")
    args = rest.split(":") if rest else []
    try:
        params = [float(a) for a in args]
    except ValueError:
        params = None

    if kind == "const" and params and len(params) == 1:
        (v,) = params
        _nonneg(spec, v)
        return DivisionRate(spec, lambda x: np.full_like(x, v), constant=v)
    if kind == "jump" and params and len(params) == 3:
        v1, v2, xj = params
        _nonneg(spec, v1, v2)
        return DivisionRate(spec, lambda x: np.where(x < xj, v1, v2))
    if kind == "gauss-bump" and params and len(params) == 4:
        base, amp, center, width = params
        if width < 0:
            raise DomainError(f"{spec}: width must be nonnegative")
        _nonneg(spec, base, base + amp)
        return DivisionRate(spec, lambda x: base + amp * np.exp(-width * (x - center) ** 2))
    if kind in ("const", "jump", "gauss-bump"):
        raise DomainError(f"malformed division-rate descriptor {spec!r}")

    path = Path(spec)
    if not path.exists():
        raise DomainError(f"unknown division-rate descriptor {spec!r} (no such file)")
    table = read_grid_function(path)
    if np.any(table.values < 0):
        raise DomainError(f"{spec}: division rate must be nonnegative")
    xs, vs = table.x, table.values
    return DivisionRate(spec, lambda x: np.interp(x, xs, vs))


def _nonneg(spec, *values):
    if any(v < 0 for v in values):
        raise DomainError(f"{spec}: division rate must be nonnegative")
