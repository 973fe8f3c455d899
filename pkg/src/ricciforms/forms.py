"""Differential p-forms on the periodic grid.

A :class:`PForm` stores only the canonical components ``xi_{i1..ip}`` with
``i1 < ... < ip`` (lexicographic order, ``C(n, p)`` of them per node).
Everything that sums over *all* index tuples, such as the pointwise norm, goes
through :func:`to_full`, the antisymmetric dense expansion.

Norm convention: ``|xi|^2 = xi_{i1..ip} xi^{i1..ip}`` summed over every tuple,
which is ``p!`` times the sum over increasing tuples. ``dx^1 ^ dx^2`` on the
flat torus therefore has ``|xi|^2 = 2``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np

from .curvature import MetricState, covariant_derivative, full_contraction
from .grid import GridSpec, einsum_grid, partial_derivative

# Sign of the codifferential, delta xi = CODIFF_SIGN * g^{jk} xi_{j...;k}.
# With +1, ``d delta + delta d`` coincides with the Weitzenboeck expression
# (rough Laplacian minus curvature terms), so it is the negative semidefinite
# form Laplacian and the heat flow d xi/dt = (d delta + delta d) xi decays.
# Pinned by the Weitzenboeck tests in tests/test_flow.py, which check both signs.
CODIFF_SIGN = 1


@lru_cache(maxsize=None)
def multi_indices(n: int, p: int) -> tuple[tuple[int, ...], ...]:
    """Strictly increasing index tuples of length ``p`` below ``n``, lexicographic."""
    return tuple(itertools.combinations(range(n), p))


@lru_cache(maxsize=None)
def _position(n: int, p: int) -> dict[tuple[int, ...], int]:
    return {idx: pos for pos, idx in enumerate(multi_indices(n, p))}


def permutation_sign(seq) -> int:
    """Sign of the permutation sorting ``seq`` (0 if an entry repeats)."""
    seq = list(seq)
    if len(set(seq)) != len(seq):
        return 0
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


@dataclass(frozen=True)
class PForm:
    degree: int
    components: np.ndarray  # (C(n, p),) + grid.shape
    grid: GridSpec

    def __post_init__(self):
        n = self.grid.dim
        if not 0 <= self.degree <= n:
            raise ValueError(f"form degree {self.degree} outside 0..{n}")
        expected = (comb(n, self.degree),) + self.grid.shape
        if self.components.shape != expected:
            raise ValueError(f"components must have shape {expected}, got {self.components.shape}")

    @property
    def indices(self):
        return multi_indices(self.grid.dim, self.degree)

    def component(self, idx) -> np.ndarray:
        return self.components[_position(self.grid.dim, self.degree)[tuple(idx)]]

    def __add__(self, other: "PForm") -> "PForm":
        return PForm(self.degree, self.components + other.components, self.grid)

    def __sub__(self, other: "PForm") -> "PForm":
        return PForm(self.degree, self.components - other.components, self.grid)

    def scaled(self, c: float) -> "PForm":
        return PForm(self.degree, c * self.components, self.grid)


def zero_form(grid: GridSpec, p: int) -> PForm:
    return PForm(p, np.zeros((comb(grid.dim, p),) + grid.shape), grid)


def basis_form(grid: GridSpec, idx, coefficient=1.0) -> PForm:
    """``coefficient * dx^{i1} ^ ... ^ dx^{ip}`` for an increasing ``idx``."""
    idx = tuple(idx)
    xi = zero_form(grid, len(idx))
    comps = xi.components.copy()
    comps[_position(grid.dim, len(idx))[idx]] = coefficient
    return PForm(len(idx), comps, grid)


def full_component(xi: PForm, node, idx) -> float:
    """Component for an arbitrary index tuple at one node."""
    idx = tuple(idx)
    sign = permutation_sign(idx)
    if sign == 0:
        return 0.0
    return sign * float(xi.component(tuple(sorted(idx)))[tuple(node)])


def to_full(xi: PForm) -> np.ndarray:
    """Dense antisymmetric array of shape ``(n,)*p + grid``."""
    n, p = xi.grid.dim, xi.degree
    out = np.zeros((n,) * p + xi.grid.shape)
    for pos, idx in enumerate(xi.indices):
        for perm in itertools.permutations(range(p)):
            tup = tuple(idx[q] for q in perm)
            out[tup] = permutation_sign(perm) * xi.components[pos]
    return out


def from_full(t: np.ndarray, grid: GridSpec, p: int) -> PForm:
    """Canonical components of a dense covariant p-tensor (no antisymmetrisation)."""
    comps = np.stack([t[idx] for idx in multi_indices(grid.dim, p)]) if p else t[np.newaxis]
    return PForm(p, np.ascontiguousarray(comps), grid)


def pointwise_norm_sq(xi: PForm, ms: MetricState) -> np.ndarray:
    if xi.degree == 0:
        return xi.components[0] ** 2
    full = to_full(xi)
    return full_contraction(full, full, ms.g_inv)


def exterior_derivative(xi: PForm) -> PForm:
    """``(d xi)_{i0..ip} = sum_s (-1)^s d_{i_s} xi_{i0..^i_s..ip}``."""
    n, p, grid = xi.grid.dim, xi.degree, xi.grid
    if p >= n:
        raise ValueError(f"exterior derivative of a top-degree ({p}) form")
    comps = []
    for idx in multi_indices(n, p + 1):
        acc = np.zeros(grid.shape)
        for s, axis in enumerate(idx):
            rest = idx[:s] + idx[s + 1 :]
            term = partial_derivative(xi.component(rest), axis, grid)
            acc = acc - term if s % 2 else acc + term
        comps.append(acc)
    return PForm(p + 1, np.stack(comps), grid)


def codifferential(xi: PForm, ms: MetricState, sign: int = CODIFF_SIGN) -> PForm:
    """``(delta xi)_{i2..ip} = sign * g^{jk} xi_{j i2..ip ; k}``."""
    p = xi.degree
    if p == 0:
        raise ValueError("codifferential of a 0-form")
    nabla = covariant_derivative(to_full(xi), (0, p), ms)  # [j, i2.., k]
    idx = "abcdefgh"[: p - 1]
    div = einsum_grid(f"jk...,j{idx}k...->{idx}...", ms.g_inv, nabla)
    return from_full(sign * div, xi.grid, p - 1)


def hodge_laplacian(xi: PForm, ms: MetricState, sign: int = CODIFF_SIGN) -> PForm:
    """``d delta xi + delta d xi`` built from the two first-order operators."""
    n, p = xi.grid.dim, xi.degree
    out = zero_form(xi.grid, p)
    if p > 0:
        out = out + exterior_derivative(codifferential(xi, ms, sign))
    if p < n:
        out = out + codifferential(exterior_derivative(xi), ms, sign)
    return out
