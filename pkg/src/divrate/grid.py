"""Uniform 1-D grids, node-sampled functions and the quadratures shared by the solvers.

All integrals use the left-rectangle rule ``dx * sum(values)``, which matches
the cell-average reading of the finite-volume data.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DomainError, GridMismatchError


@dataclass(frozen=True)
class Grid:
    """Uniform mesh ``x_i = i * dx`` on ``[0, x_max]`` with ``n_points = I + 1`` nodes."""

    x_max: float
    n_points: int

    def __post_init__(self):
        if self.n_points < 2:
            raise DomainError(f"a grid needs at least 2 nodes, got {self.n_points}")
        if not (self.x_max > 0 and math.isfinite(self.x_max)):
            raise DomainError(f"x_max must be positive and finite, got {self.x_max}")

    @classmethod
    def from_intervals(cls, x_max: float, intervals: int) -> "Grid":
        return cls(float(x_max), int(intervals) + 1)

    @property
    def intervals(self) -> int:
        return self.n_points - 1

    @property
    def dx(self) -> float:
        return self.x_max / self.intervals

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n_points) * self.dx

    def sample(self, func: Callable[[np.ndarray], np.ndarray]) -> "GridFunction":
        """Evaluate a vectorized callable at every node."""
        values = np.broadcast_to(np.asarray(func(self.nodes), dtype=float), (self.n_points,))
        return GridFunction(self, values.copy())

    def zeros(self) -> "GridFunction":
        return GridFunction(self, np.zeros(self.n_points))

    def same_as(self, other: "Grid") -> bool:
        return self.n_points == other.n_points and math.isclose(
            self.x_max, other.x_max, rel_tol=1e-12, abs_tol=0.0
        )


class GridFunction:
    """Real values sampled at the nodes of a :class:`Grid`.

    Arithmetic with scalars, arrays or grid functions on the same grid returns
    a new :class:`GridFunction`.
    """

    __slots__ = ("grid", "values")
    __array_priority__ = 100

    def __init__(self, grid: Grid, values: Iterable[float]):
        arr = np.array(values, dtype=float)
        if arr.ndim != 1 or arr.shape[0] != grid.n_points:
            raise GridMismatchError(
                f"expected {grid.n_points} values for this grid, got shape {arr.shape}"
            )
        self.grid = grid
        self.values = arr

    @property
    def x(self) -> np.ndarray:
        return self.grid.nodes

    def __len__(self):
        return self.grid.n_points

    def __repr__(self):
        return f"GridFunction(x_max={self.grid.x_max!r}, n_points={self.grid.n_points})"

    def copy(self) -> "GridFunction":
        return GridFunction(self.grid, self.values.copy())

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.grid, values)

    def _other(self, other):
        if isinstance(other, GridFunction):
            check_same_grid(self, other)
            return other.values
        return other

    def __add__(self, other):
        return self.with_values(self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self.with_values(self.values - self._other(other))

    def __rsub__(self, other):
        return self.with_values(self._other(other) - self.values)

    def __mul__(self, other):
        return self.with_values(self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self.with_values(self.values / self._other(other))

    def __neg__(self):
        return self.with_values(-self.values)


def check_same_grid(*funcs: GridFunction) -> Grid:
    """Return the common grid of ``funcs`` or raise :class:`GridMismatchError`."""
    grid = funcs[0].grid
    for f in funcs[1:]:
        if not grid.same_as(f.grid):
            raise GridMismatchError(f"grid mismatch: {grid} vs {f.grid}")
    return grid


def integrate(f: GridFunction) -> float:
    """Left-rectangle quadrature ``dx * sum_i f_i`` over all nodes."""
    return float(f.grid.dx * np.sum(f.values))


def integrate_x(f: GridFunction) -> float:
    """First moment ``dx * sum_i x_i f_i``."""
    return float(f.grid.dx * np.dot(f.grid.nodes, f.values))


def resample(f: GridFunction, target: Grid) -> GridFunction:
    """Piecewise-linear interpolation of ``f`` onto the nodes of ``target``.

    Raises
    ------
    DomainError
        If ``target`` extends past the right end of the source grid.
    """
    src = f.grid
    if target.x_max > src.x_max * (1 + 1e-12):
        raise DomainError(
            f"target domain [0, {target.x_max}] exceeds source domain [0, {src.x_max}]"
        )
    x = np.minimum(target.nodes, src.x_max)
    return GridFunction(target, np.interp(x, src.nodes, f.values))


def half_index_values(values: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """Vectorized ``G_{i/2}``: the node value for even ``i``, the mean of the two
    neighbouring half indices for odd ``i``."""
    idx = np.asarray(idx)
    even = values[idx // 2]
    odd = 0.5 * (values[(idx - 1) // 2] + values[np.minimum((idx + 1) // 2, len(values) - 1)])
    return np.where(idx % 2 == 0, even, odd)


def half_index_value(f: GridFunction, i: int) -> float:
    """``f_{i/2}`` with the averaging convention for odd ``i``."""
    n = f.grid.n_points
    if not 0 <= i < n:
        raise IndexError(f"index {i} outside 0..{n - 1}")
    if i % 2 == 0:
        return float(f.values[i // 2])
    return 0.5 * float(f.values[(i - 1) // 2] + f.values[(i + 1) // 2])


# --- CSV --------------------------------------------------------------------

def format_float(value: float) -> str:
    """Full double precision text, empty string for NaN (absent values)."""
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ""
    return format(float(value), ".17g")


def write_grid_function(
    f: GridFunction,
    path,
    header: Sequence[str] = (),
    value_name: str = "value",
) -> None:
    """Write ``x,<value_name>`` CSV; ``header`` lines are emitted as ``# ...`` comments."""
    with open(path, "w", newline="") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["x", value_name])
        for x, v in zip(f.grid.nodes, f.values):
            writer.writerow([format_float(x), format_float(v)])


def read_comment_header(path) -> dict:
    """Parse ``# key=value`` pairs (comma separated) from leading comment lines."""
    meta = {}
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            for item in line[1:].split(","):
                if "=" in item:
                    key, _, val = item.partition("=")
                    meta[key.strip()] = val.strip()
    return meta


def read_grid_function(path) -> GridFunction:
    """Read a two-column ``x,value`` CSV written by :func:`write_grid_function`.

    The grid is reconstructed from the first and last abscissae; the nodes must
    be uniformly spaced starting at 0.
    """
    text = Path(path).read_text()
    rows = [r for r in csv.reader(io.StringIO(text)) if r and not r[0].startswith("#")]
    if not rows:
        raise DomainError(f"{path}: no data rows")
    body = rows[1:] if not _is_number(rows[0][0]) else rows
    x = np.array([float(r[0]) for r in body])
    v = np.array([float(r[1]) if r[1] != "" else math.nan for r in body])
    if len(x) < 2 or abs(x[0]) > 1e-12:
        raise DomainError(f"{path}: grid must start at x=0 and have at least 2 nodes")
    grid = Grid(float(x[-1]), len(x))
    if not np.allclose(x, grid.nodes, rtol=1e-9, atol=1e-12 * grid.x_max):
        raise DomainError(f"{path}: nodes are not uniformly spaced")
    return GridFunction(grid, v)


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True
