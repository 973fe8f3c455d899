"""Periodic uniform grids, finite differences and quadrature.

Every field is a plain ``numpy`` array whose *trailing* ``dim`` axes are the
grid axes; leading axes (if any) are tensor components. A scalar field on a
3-D grid therefore has shape ``(N1, N2, N3)`` and a (0,2) tensor has shape
``(3, 3, N1, N2, N3)``.

Derivatives use the 5-point, 4th-order central stencil with periodic
wraparound (``np.roll``). The same routines work on axis-0 slabs cut out of a
larger grid: the outer two rows per derivative level are then garbage and the
caller crops them (see :func:`ricciforms.curvature.iter_slabs`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
import numpy as np

# f'(x) ~ (f(x-2h) - 8 f(x-h) + 8 f(x+h) - f(x+2h)) / (12 h)
STENCIL_OFFSETS = (-2, -1, 1, 2)
STENCIL_WEIGHTS = (1.0, -8.0, 8.0, -1.0)
STENCIL_HALO = 2
MIN_POINTS = 8


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid on the box ``prod [0, L_i)``."""

    points: tuple[int, ...]
    periods: tuple[float, ...]
    spacing: tuple[float, ...] = field(init=False)

    def __post_init__(self):
        points = tuple(int(n) for n in self.points)
        periods = tuple(float(L) for L in self.periods)
        if len(points) != len(periods):
            raise GridError("points and periods must have the same length")
        if not 2 <= len(points) <= 4:
            raise GridError(f"grid dimension must be 2, 3 or 4, got {len(points)}")
        if any(n < MIN_POINTS for n in points):
            raise GridError(f"every axis needs at least {MIN_POINTS} points, got {points}")
        if any(not (L > 0 and math.isfinite(L)) for L in periods):
            raise GridError(f"periods must be positive and finite, got {periods}")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "periods", periods)
        object.__setattr__(self, "spacing", tuple(L / n for L, n in zip(periods, points)))

    @classmethod
    def uniform(cls, dim: int, n: int, period: float = 1.0) -> "GridSpec":
        return cls((n,) * dim, (period,) * dim)

    @property
    def dim(self) -> int:
        return len(self.points)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.points

    @property
    def size(self) -> int:
        return int(np.prod(self.points))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def coordinates(self) -> list[np.ndarray]:
        """Node coordinates ``x^i`` as broadcastable open-mesh arrays."""
        axes = [np.arange(n) * h for n, h in zip(self.points, self.spacing)]
        return np.meshgrid(*axes, indexing="ij", sparse=True)

    def full_coordinates(self) -> list[np.ndarray]:
        return [np.broadcast_to(x, self.shape) for x in self.coordinates()]

    def zeros(self, *components: int) -> np.ndarray:
        return np.zeros(tuple(components) + self.shape)


def _grid_axis(f: np.ndarray, grid: GridSpec, axis: int) -> int:
    if not 0 <= axis < grid.dim:
        raise GridError(f"axis {axis} out of range for a {grid.dim}-D grid")
    if f.ndim < grid.dim:
        raise GridError(f"array of rank {f.ndim} cannot live on a {grid.dim}-D grid")
    return f.ndim - grid.dim + axis


def partial_derivative(f: np.ndarray, axis: int, grid: GridSpec) -> np.ndarray:
    """4th-order periodic central difference of ``f`` along grid ``axis``."""
    ax = _grid_axis(f, grid, axis)
    out = STENCIL_WEIGHTS[0] * np.roll(f, -STENCIL_OFFSETS[0], axis=ax)
    for s, w in zip(STENCIL_OFFSETS[1:], STENCIL_WEIGHTS[1:]):
        out += w * np.roll(f, -s, axis=ax)
    out /= 12.0 * grid.spacing[axis]
    return out


def gradient(f: np.ndarray, grid: GridSpec) -> np.ndarray:
    """All first partials; the new derivative axis is prepended."""
    return np.stack([partial_derivative(f, a, grid) for a in range(grid.dim)])


def second_partial(f: np.ndarray, axis_a: int, axis_b: int, grid: GridSpec) -> np.ndarray:
    """Composition of two first-derivative stencils.

    The smaller axis is always differentiated first so the result does not
    depend on argument order, bit for bit.
    """
    a, b = sorted((axis_a, axis_b))
    return partial_derivative(partial_derivative(f, a, grid), b, grid)


def hessian(f: np.ndarray, grid: GridSpec) -> np.ndarray:
    """``H[a, b, ...] = d_a d_b f`` with ``H[a, b]`` identical to ``H[b, a]``."""
    n = grid.dim
    first = [partial_derivative(f, a, grid) for a in range(n)]
    out = np.empty((n, n) + f.shape)
    for a in range(n):
        for b in range(a, n):
            out[a, b] = partial_derivative(first[a], b, grid)
            if b != a:
                out[b, a] = out[a, b]
    return out


def integrate_scalar(f: np.ndarray, weight: np.ndarray | None, grid: GridSpec) -> float:
    """Rectangle rule ``sum f * weight * prod(h)``.

    Uses ``math.fsum`` so the reduction is order-insensitive.
    """
    if f.shape != grid.shape:
        raise GridError(f"field shape {f.shape} does not match grid {grid.shape}")
    if weight is not None:
        if weight.shape != grid.shape:
            raise GridError(f"weight shape {weight.shape} does not match grid {grid.shape}")
        f = f * weight
    return math.fsum(f.ravel()) * grid.cell_volume


def check_finite(f: np.ndarray, what: str = "field") -> None:
    if not np.all(np.isfinite(f)):
        raise GridError(f"{what} contains non-finite values")


def sample(fn, grid: GridSpec) -> np.ndarray:
    """Evaluate ``fn(*coords)`` on the grid nodes (broadcast to full shape)."""
    return np.broadcast_to(fn(*grid.coordinates()), grid.shape).astype(float)


def einsum_grid(spec: str, *ops: np.ndarray) -> np.ndarray:
    """``np.einsum`` where ``...`` stands for the trailing grid axes.

    The grid axes of every operand are flattened into one contiguous axis
    and strided views are copied first; einsum is several times slower on
    either an ellipsis or a non-contiguous operand.
    """
    lhs, rhs = spec.split("->")
    terms = lhs.split(",")
    if len(terms) != len(ops):
        raise ValueError(f"{spec!r} expects {len(terms)} operands, got {len(ops)}")
    grid_shape = None
    flat = []
    for term, op in zip(terms, ops):
        k = len(term.replace("...", ""))
        shape = op.shape[k:]
        if grid_shape is None:
            grid_shape = shape
        elif shape != grid_shape:
            raise ValueError(f"operands disagree on grid shape: {grid_shape} vs {shape}")
        flat.append(np.ascontiguousarray(op.reshape(op.shape[:k] + (-1,))))
    out = np.einsum(spec.replace("...", "P"), *flat, optimize=len(ops) > 2)
    return out.reshape(out.shape[:-1] + grid_shape)
