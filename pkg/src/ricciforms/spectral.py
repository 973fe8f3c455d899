"""Eigenvalue bounds on curvature: L(t), W(t), the curvature-operator constant k
and the two pinching tests.

Quadratic forms on 2-forms are written in the contravariant components
``x_(ab) = xi^{ab}``, a < b, of an antisymmetric ``xi``. For a covariant
4-tensor ``T`` the form ``T_{ijkl} xi^{ij} xi^{kl}`` has the matrix

    M_(ab),(cd) = T_abcd - T_bacd - T_abdc + T_badc

and the Gram form ``xi^{ij} xi_{ij}`` has ``G_(ab),(cd) = 2 (g_ac g_bd - g_ad g_bc)``.
The curvature operator ``xi_{ij} R^{ij}_{kl} xi^{kl}`` is the same expression
with ``T = R_{ijkl}`` (raising on R cancels the lowering on xi).

All node-wise eigenproblems go through one batched cyclic Jacobi solver.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .curvature import CurvatureBundle, MetricState, UnsupportedDimensionError

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 50


class NotPositiveDefiniteError(ValueError):
    pass


class JacobiConvergenceError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Jacobi eigensolver


def jacobi_eigh(a: np.ndarray, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS):
    """Eigen-decomposition of a stack of symmetric matrices by cyclic Jacobi rotations.

    ``a`` has shape ``(..., m, m)``. Returns ``(w, v)`` with eigenvalues ``w``
    ascending along the last axis and ``a = v diag(w) v^T``. Every matrix in the
    stack is rotated in lockstep; sweeping stops once each matrix satisfies
    ``off(A) <= tol * ||A||_F``.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ValueError(f"expected a stack of square matrices, got shape {a.shape}")
    batch = a.shape[:-2]
    m = a.shape[-1]
    A = 0.5 * (a + np.swapaxes(a, -1, -2))
    A = A.reshape((-1, m, m)).copy()
    V = np.broadcast_to(np.eye(m), A.shape).copy()
    scale = np.sqrt(np.sum(A * A, axis=(1, 2)))
    pairs = list(itertools.combinations(range(m), 2))

    offmask = ~np.eye(m, dtype=bool)

    def off(A):
        return np.sqrt(np.sum(A[:, offmask] ** 2, axis=1))

    converged = off(A) <= tol * scale
    sweeps = 0
    while not np.all(converged):
        if sweeps == max_sweeps:
            worst = float(np.max(off(A) / np.where(scale > 0, scale, 1.0)))
            raise JacobiConvergenceError(
                f"Jacobi did not converge in {max_sweeps} sweeps (relative off-diagonal {worst:.3e})"
            )
        for p, q in pairs:
            apq = A[:, p, q]
            active = (apq != 0.0) & ~converged
            if not np.any(active):
                continue
            app, aqq = A[:, p, p], A[:, q, q]
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                theta = np.where(active, (aqq - app) / (2.0 * np.where(active, apq, 1.0)), 0.0)
                t = np.where(active, np.copysign(1.0, theta) / (np.abs(theta) + np.hypot(theta, 1.0)), 0.0)
            # theta overflowing to inf gives t = 0, which is the correct limit.
            t = np.where(np.isfinite(t), t, 0.0)
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            c3, s3 = c[:, None], s[:, None]
            Ap, Aq = A[:, :, p].copy(), A[:, :, q].copy()
            A[:, :, p] = c3 * Ap - s3 * Aq
            A[:, :, q] = s3 * Ap + c3 * Aq
            Ap, Aq = A[:, p, :].copy(), A[:, q, :].copy()
            A[:, p, :] = c3 * Ap - s3 * Aq
            A[:, q, :] = s3 * Ap + c3 * Aq
            A[:, p, q] = np.where(active, 0.0, A[:, p, q])
            A[:, q, p] = A[:, p, q]
            Vp, Vq = V[:, :, p].copy(), V[:, :, q].copy()
            V[:, :, p] = c3 * Vp - s3 * Vq
            V[:, :, q] = s3 * Vp + c3 * Vq
        sweeps += 1
        converged = off(A) <= tol * scale
    w = np.diagonal(A, axis1=1, axis2=2).copy()
    order = np.argsort(w, axis=1, kind="stable")
    w = np.take_along_axis(w, order, axis=1)
    V = np.take_along_axis(V, order[:, None, :], axis=2)
    return w.reshape(batch + (m,)), V.reshape(batch + (m, m))


def inverse_sqrt_spd(gram: np.ndarray, rtol: float = 1e-12) -> np.ndarray:
    """``G^{-1/2}`` for a stack of SPD matrices, via their Jacobi eigenbasis."""
    w, v = jacobi_eigh(gram)
    top = np.max(np.abs(w), axis=-1, keepdims=True)
    bad = ~(w > rtol * np.where(top > 0, top, 1.0))
    if np.any(bad):
        idx = np.argwhere(np.any(bad, axis=-1))[0]
        raise NotPositiveDefiniteError(
            f"Gram matrix is not positive definite (eigenvalue {float(np.min(w)):.3e}, batch index {tuple(int(i) for i in idx)})"
        )
    return np.einsum("...ik,...k,...jk->...ij", v, 1.0 / np.sqrt(w), v)


def sym_eigensolve(a: np.ndarray, gram: np.ndarray, vectors: bool = False):
    """Generalized eigenvalues of ``a x = lambda G x`` (ascending), for stacks.

    Whitens with ``G^{-1/2}`` and diagonalises ``G^{-1/2} A G^{-1/2}``. With
    ``vectors=True`` also returns G-orthonormal eigenvectors as columns.
    """
    a = np.asarray(a, dtype=float)
    gram = np.asarray(gram, dtype=float)
    if a.shape != gram.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {gram.shape}")
    w_half = inverse_sqrt_spd(gram)
    c = w_half @ (0.5 * (a + np.swapaxes(a, -1, -2))) @ w_half
    lam, y = jacobi_eigh(c)
    if vectors:
        return lam, w_half @ y
    return lam


# ---------------------------------------------------------------------------
# Node-wise matrices


def _nodes_last_to_batch(t: np.ndarray, k: int) -> np.ndarray:
    """``(m, m) + grid`` -> ``(P, m, m)``."""
    comp = t.shape[:k]
    return np.moveaxis(t.reshape(comp + (-1,)), -1, 0)


def two_form_pairs(n: int):
    return list(itertools.combinations(range(n), 2))


def two_form_matrix(t: np.ndarray, n: int) -> np.ndarray:
    """Matrix of ``T_{ijkl} xi^{ij} xi^{kl}`` on canonical pairs, node axes last."""
    pairs = two_form_pairs(n)
    a = np.array([p[0] for p in pairs])
    b = np.array([p[1] for p in pairs])
    A, B = a[:, None], b[:, None]
    C, D = a[None, :], b[None, :]
    m = t[A, B, C, D] - t[B, A, C, D] - t[A, B, D, C] + t[B, A, D, C]
    return 0.5 * (m + np.swapaxes(m, 0, 1))


def two_form_gram(g: np.ndarray, n: int) -> np.ndarray:
    """Matrix of ``xi^{ij} xi_{ij}`` on canonical pairs, node axes last."""
    pairs = two_form_pairs(n)
    a = np.array([p[0] for p in pairs])
    b = np.array([p[1] for p in pairs])
    A, B = a[:, None], b[:, None]
    C, D = a[None, :], b[None, :]
    return 2.0 * (g[A, C] * g[B, D] - g[A, D] * g[B, C])


@dataclass(frozen=True)
class TwoFormOperatorSpectrum:
    """Node-wise generalized eigenvalues (ascending, last axis) and their extremes."""

    eigenvalues: np.ndarray  # grid + (m,)
    min: float
    max: float

    @property
    def max_abs(self) -> float:
        return max(abs(self.min), abs(self.max))


def two_form_spectrum(t: np.ndarray, ms: MetricState) -> TwoFormOperatorSpectrum:
    n = ms.dim
    mat = _nodes_last_to_batch(two_form_matrix(t, n), 2)
    gram = _nodes_last_to_batch(two_form_gram(ms.g, n), 2)
    lam = sym_eigensolve(mat, gram).reshape(ms.grid.shape + (mat.shape[-1],))
    return TwoFormOperatorSpectrum(lam, float(lam.min()), float(lam.max()))


def ricci_eigenvalues(cb: CurvatureBundle, ms: MetricState) -> np.ndarray:
    """Eigenvalues of ``R_ij`` relative to ``g_ij`` per node, shape ``grid + (n,)``."""
    ric = _nodes_last_to_batch(cb.ricci, 2)
    g = _nodes_last_to_batch(ms.g, 2)
    return sym_eigensolve(ric, g).reshape(ms.grid.shape + (ms.dim,))


# ---------------------------------------------------------------------------
# Scalar bounds


def ricci_min_eigenvalue(cb: CurvatureBundle, ms: MetricState) -> float:
    """L: the smallest eigenvalue of Ricci relative to the metric, over all nodes."""
    return float(ricci_eigenvalues(cb, ms)[..., 0].min())


def _require_weyl(cb: CurvatureBundle, ms: MetricState):
    if ms.dim < 3:
        raise UnsupportedDimensionError("Weyl quantities need n >= 3")
    if cb.decomposition is None:
        raise ValueError("curvature bundle was built without the Weyl decomposition")
    return cb.decomposition


def weyl_spectrum(cb: CurvatureBundle, ms: MetricState) -> TwoFormOperatorSpectrum:
    return two_form_spectrum(_require_weyl(cb, ms).weyl, ms)


def weyl_operator_norm(cb: CurvatureBundle, ms: MetricState) -> float:
    """W: largest |eigenvalue| of the Weyl form on 2-forms, over all nodes."""
    return weyl_spectrum(cb, ms).max_abs


def curvature_operator_spectrum(cb: CurvatureBundle, ms: MetricState) -> TwoFormOperatorSpectrum:
    return two_form_spectrum(cb.riemann_low, ms)


def curvature_operator_bound(cb: CurvatureBundle, ms: MetricState) -> float:
    """k with ``xi_ij R^ij_kl xi^kl >= 2k |xi|^2`` sharp: half the smallest eigenvalue."""
    return 0.5 * curvature_operator_spectrum(cb, ms).min


def _theorem1_terms(n: int):
    if n < 3:
        raise UnsupportedDimensionError("the pinching margin needs n >= 3")
    return 4.0 / (n - 2), 2.0 / ((n - 1) * (n - 2))


def theorem1_margin(cb: CurvatureBundle, ms: MetricState) -> float:
    """``4 L / (n-2) - W - 2 R_max / ((n-1)(n-2))``; non-negative means the hypothesis holds.

    L is the global minimum, W and R_max global maxima.
    """
    c_l, c_r = _theorem1_terms(ms.dim)
    big_l = ricci_min_eigenvalue(cb, ms)
    big_w = weyl_operator_norm(cb, ms)
    return c_l * big_l - big_w - c_r * float(cb.scalar.max())


def theorem1_margin_field(cb: CurvatureBundle, ms: MetricState) -> np.ndarray:
    """Node-wise version of :func:`theorem1_margin` (each term evaluated at the node)."""
    c_l, c_r = _theorem1_terms(ms.dim)
    lam_ric = ricci_eigenvalues(cb, ms)[..., 0]
    weyl = np.max(np.abs(weyl_spectrum(cb, ms).eigenvalues), axis=-1)
    return c_l * lam_ric - weyl - c_r * cb.scalar


def delta_n(n: int) -> Fraction:
    """Huisken's pinching constant for dimension ``n >= 4``."""
    if n < 4:
        raise UnsupportedDimensionError(f"delta_n is defined for n >= 4, got {n}")
    if n == 4:
        return Fraction(1, 5)
    if n == 5:
        return Fraction(1, 10)
    return Fraction(2, (n - 2) * (n + 1))


@dataclass(frozen=True)
class HuiskenPinch:
    ratio_max: float
    delta_n: Fraction
    holds: bool
    applicable: bool


def huisken_pinch(cb: CurvatureBundle, ms: MetricState) -> HuiskenPinch:
    """``sup (|W|^2 + |V|^2) / |U|^2`` against ``delta_n``.

    Needs positive scalar curvature at every node; otherwise the outcome is
    flagged not applicable (ratio NaN) instead of raising.
    """
    n = ms.dim
    dn = delta_n(n)
    dec = _require_weyl(cb, ms)
    if not np.all(cb.scalar > 0):
        return HuiskenPinch(math.nan, dn, False, False)
    ratio = float(np.max((dec.norm_weyl + dec.norm_v) / dec.norm_u))
    return HuiskenPinch(ratio, dn, ratio < float(dn), True)


@dataclass(frozen=True)
class PinchReport:
    t: float
    L_val: float
    W_val: float
    theorem1_margin: float
    huisken_ratio_max: float
    delta_n: float
    k_bound: float
    huisken_holds: bool | None = None

    def as_dict(self) -> dict:
        return {
            "t": self.t,
            "L": self.L_val,
            "W": self.W_val,
            "theorem1_margin": self.theorem1_margin,
            "huisken_ratio_max": self.huisken_ratio_max,
            "delta_n": self.delta_n,
            "k": self.k_bound,
            "huisken_holds": self.huisken_holds,
        }


def pinch_report(cb: CurvatureBundle, ms: MetricState, t: float) -> PinchReport:
    """Every bound at one time. Quantities undefined in this dimension are NaN."""
    n = ms.dim
    big_l = ricci_min_eigenvalue(cb, ms)
    k = curvature_operator_bound(cb, ms)
    big_w = margin = ratio = dn = math.nan
    holds = None
    if n >= 3:
        big_w = weyl_operator_norm(cb, ms)
        c_l, c_r = _theorem1_terms(n)
        margin = c_l * big_l - big_w - c_r * float(cb.scalar.max())
    if n >= 4:
        hp = huisken_pinch(cb, ms)
        ratio, dn, holds = hp.ratio_max, float(hp.delta_n), (hp.holds if hp.applicable else None)
    return PinchReport(t, big_l, big_w, margin, ratio, dn, k, holds)
