"""Levi-Civita connection, Riemann curvature and its orthogonal decomposition.

Index conventions (component axes come first, grid axes last):

``christoffel[l, j, k]``
    Gamma^l_{jk}, symmetric in (j, k).
``riemann_mixed[l, i, j, k]``
    R^l_{ijk} = d_i Gamma^l_{jk} - d_j Gamma^l_{ik}
    + Gamma^l_{im} Gamma^m_{jk} - Gamma^l_{jm} Gamma^m_{ik}.
    This is the single source of truth for signs; it is antisymmetric in (i, j).
``riemann_low[i, j, k, l]``
    R_{ijkl} = g_{hl} R^h_{ijk}. Ricci is ``R_{jk} = R^i_{ijk} = g^{il} R_{ijkl}``
    and the sectional curvature of the (i, j) plane is ``R_{ijji}``. This is the
    tensor that appears in the Weitzenboeck formula, in the evolution of |xi|^2
    and in the curvature-operator bound.
``rm[i, j, k, l]``
    ``-riemann_low``, i.e. the convention in which ``R_{ijij}`` is sectional
    curvature and ``R_{jl} = g^{ik} R_{ijkl}``. The Weyl / traceless-Ricci /
    scalar split and the tensor norms are taken in this convention, because the
    Weyl formula below is only trace-free there.

Derivatives of the Christoffel symbols are *not* obtained by differencing the
Gamma field. Everything is expressed through the metric jet (g, dg, ddg) with
the exact product rule ``d(g^-1) = -g^-1 dg g^-1``; since ``ddg`` is symmetric
bit for bit, the algebraic curvature symmetries then hold to round-off on any
grid. Differencing Gamma directly is kept as the independent check
(:func:`riemann_by_differencing`).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, fields, replace

import numpy as np

from .grid import STENCIL_HALO, GridSpec, einsum_grid, gradient, hessian, partial_derivative

LETTERS = "abcdefghijklmnopqrstuv"


class DegenerateMetricError(ValueError):
    """The metric stopped being positive definite at some node."""

    def __init__(self, message: str, node: tuple[int, ...], min_eig: float):
        super().__init__(message)
        self.node = node
        self.min_eig = min_eig


class UnsupportedDimensionError(ValueError):
    pass


_ein = einsum_grid


def _swap(t: np.ndarray, a: int, b: int) -> np.ndarray:
    return np.swapaxes(t, a, b)


def _node_min_eigenvalues(g: np.ndarray, dim: int) -> np.ndarray:
    mats = np.moveaxis(g, (0, 1), (-2, -1))
    return np.linalg.eigvalsh(mats)[..., 0]


@dataclass(frozen=True)
class MetricState:
    grid: GridSpec
    g: np.ndarray
    g_inv: np.ndarray
    det_g: np.ndarray
    sqrt_det_g: np.ndarray
    dg: np.ndarray  # dg[c, a, b] = d_c g_ab
    ddg: np.ndarray  # ddg[c, d, a, b] = d_c d_d g_ab
    gamma_low: np.ndarray  # Gamma_{m jk}, first kind
    christoffel: np.ndarray  # Gamma^l_{jk}
    min_eig_g: float

    @property
    def dim(self) -> int:
        return self.grid.dim


def metric_state(g: np.ndarray, grid: GridSpec, spd_floor: float = 0.0) -> MetricState:
    """Build the metric state, checking positive definiteness at every node.

    Raises :class:`DegenerateMetricError` naming the worst node when the
    smallest eigenvalue of ``g`` drops to ``spd_floor`` or below.
    """
    n = grid.dim
    if g.shape[:2] != (n, n) or g.ndim != 2 + n:
        raise ValueError(f"metric must have shape {(n, n)} + grid, got {g.shape}")
    g = 0.5 * (g + _swap(g, 0, 1))
    if not np.all(np.isfinite(g)):
        raise DegenerateMetricError("metric has non-finite entries", (), float("nan"))
    eig = _node_min_eigenvalues(g, n)
    worst = np.unravel_index(int(np.argmin(eig)), eig.shape)
    min_eig = float(eig[worst])
    if not min_eig > spd_floor:
        raise DegenerateMetricError(
            f"metric not positive definite: smallest eigenvalue {min_eig:.3e} at node "
            f"{tuple(int(i) for i in worst)}",
            tuple(int(i) for i in worst),
            min_eig,
        )
    mats = np.moveaxis(g, (0, 1), (-2, -1))
    g_inv = np.moveaxis(np.linalg.inv(mats), (-2, -1), (0, 1))
    g_inv = 0.5 * (g_inv + _swap(g_inv, 0, 1))
    det = np.linalg.det(mats)

    dg = gradient(g, grid)
    ddg = hessian(g, grid)
    gamma_low = connection_first_kind(dg)
    chris = _ein("lm...,mjk...->ljk...", g_inv, gamma_low)
    chris = 0.5 * (chris + _swap(chris, 1, 2))
    return MetricState(grid, g, g_inv, det, np.sqrt(det), dg, ddg, gamma_low, chris, min_eig)


def connection_first_kind(dg: np.ndarray) -> np.ndarray:
    """``Gamma_{mjk} = (d_j g_mk + d_k g_mj - d_m g_jk) / 2``."""
    return 0.5 * (_swap(dg, 0, 1) + np.transpose(dg, (1, 2, 0) + tuple(range(3, dg.ndim))) - dg)


def christoffel(g: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Christoffel symbols of the second kind, ``Gamma^i_{jk}``."""
    return metric_state(g, grid).christoffel


# ---------------------------------------------------------------------------
# Riemann tensor


def _christoffel_derivative(ms: MetricState) -> np.ndarray:
    """``out[i, l, j, k] = d_i Gamma^l_{jk}`` via the product rule on the metric jet."""
    ddg = ms.ddg
    # d_i Gamma_{mjk} = (dd_ij g_mk + dd_ik g_mj - dd_im g_jk) / 2
    rest = tuple(range(4, ddg.ndim))
    t1 = np.transpose(ddg, (0, 2, 1, 3) + rest)  # [i, m, j, k] <- ddg[i, j, m, k]
    t2 = np.transpose(ddg, (0, 2, 3, 1) + rest)  # [i, m, j, k] <- ddg[i, k, m, j]
    d_gam_low = 0.5 * (t1 + t2 - ddg)
    d_ginv = -_ein("la...,iab...,bm...->ilm...", ms.g_inv, ms.dg, ms.g_inv)
    return _ein("ilm...,mjk...->iljk...", d_ginv, ms.gamma_low) + _ein(
        "lm...,imjk...->iljk...", ms.g_inv, d_gam_low
    )


def riemann(ms: MetricState) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(R^l_{ijk}, R_{ijkl})``."""
    d_gam = _christoffel_derivative(ms)
    gam = ms.christoffel
    # t[l, i, j, k] = d_i Gamma^l_jk + Gamma^l_im Gamma^m_jk
    t = np.moveaxis(d_gam, 0, 1) + _ein("lim...,mjk...->lijk...", gam, gam)
    mixed = t - _swap(t, 1, 2)
    low = _ein("hl...,hijk...->ijkl...", ms.g, mixed)
    return mixed, low


def riemann_by_differencing(ms: MetricState) -> np.ndarray:
    """R^l_{ijk} by finite-differencing the Christoffel field itself.

    Independent of :func:`riemann`; agrees with it to the truncation error.
    """
    gam = ms.christoffel
    n = ms.dim
    out = np.zeros((n,) * 4 + ms.grid.shape)
    for l, i, j, k in itertools.product(range(n), repeat=4):
        val = partial_derivative(gam[l, j, k], i, ms.grid) - partial_derivative(gam[l, i, k], j, ms.grid)
        for m in range(n):
            val += gam[l, i, m] * gam[m, j, k] - gam[l, j, m] * gam[m, i, k]
        out[l, i, j, k] = val
    return out


def contract_curvature(riemann_mixed: np.ndarray, g_inv: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """Ricci ``R_jk = R^i_{ijk}`` (symmetrised), scalar, and the symmetry residual."""
    ric = _ein("iijk...->jk...", riemann_mixed)
    asym = float(np.max(np.abs(ric - _swap(ric, 0, 1)))) if ric.size else 0.0
    ric = 0.5 * (ric + _swap(ric, 0, 1))
    scal = _ein("jk...,jk...->...", g_inv, ric)
    return ric, scal, asym


def raise_indices(t: np.ndarray, g_inv: np.ndarray, slots) -> np.ndarray:
    """Raise the given component slots of ``t`` with ``g_inv``."""
    rank = t.ndim - (g_inv.ndim - 2)
    idx = LETTERS[:rank]
    for s in slots:
        out = idx[:s] + "z" + idx[s + 1 :]
        t = _ein(f"{idx}...,z{idx[s]}...->{out}...", t, g_inv)
    return t


def full_contraction(a: np.ndarray, b: np.ndarray, g_inv: np.ndarray) -> np.ndarray:
    """Pointwise ``a_{I} b^{I}`` for covariant tensors of equal rank."""
    rank = a.ndim - (g_inv.ndim - 2)
    b_up = raise_indices(b, g_inv, range(rank))
    return (a * b_up).sum(axis=tuple(range(rank)))


def kulkarni_nomizu(h: np.ndarray, k: np.ndarray) -> np.ndarray:
    """``h_ik k_jl + h_jl k_ik - h_il k_jk - h_jk k_il``."""
    a = _ein("ik...,jl...->ijkl...", h, k)
    a += a if k is h else _ein("ik...,jl...->ijkl...", k, h)
    return a - _swap(a, 2, 3)


@dataclass(frozen=True)
class Decomposition:
    """``rm = weyl + v_part + u_part`` and the pointwise squared norms."""

    weyl: np.ndarray
    v_part: np.ndarray
    u_part: np.ndarray
    traceless_ricci: np.ndarray
    norm_rm: np.ndarray
    norm_rm_traceless: np.ndarray
    norm_weyl: np.ndarray
    norm_v: np.ndarray
    norm_u: np.ndarray


@dataclass(frozen=True)
class CurvatureBundle:
    riemann_mixed: np.ndarray
    riemann_low: np.ndarray
    ricci: np.ndarray
    scalar: np.ndarray
    ricci_asymmetry: float
    decomposition: Decomposition | None = None

    @property
    def rm(self) -> np.ndarray:
        return -self.riemann_low

    @property
    def weyl(self):
        return None if self.decomposition is None else self.decomposition.weyl

    def norm_rm_sq(self, ms: MetricState) -> np.ndarray:
        if self.decomposition is not None:
            return self.decomposition.norm_rm
        return full_contraction(self.riemann_low, self.riemann_low, ms.g_inv)


def curvature_bundle(ms: MetricState, decompose: bool = True) -> CurvatureBundle:
    mixed, low = riemann(ms)
    ric, scal, asym = contract_curvature(mixed, ms.g_inv)
    cb = CurvatureBundle(mixed, low, ric, scal, asym)
    if decompose and ms.dim >= 3:
        cb = replace(cb, decomposition=weyl_decompose(cb, ms))
    return cb


def weyl_decompose(cb: CurvatureBundle, ms: MetricState) -> Decomposition:
    """Split ``rm`` into Weyl, traceless-Ricci and scalar parts (n >= 3).

    Norms are ``T_{ijkl} T^{ijkl}``. The fully raised copies of U, V and W are
    assembled from raised Ricci and ``g^-1`` rather than by raising each part,
    so ``rm`` is the only rank-4 tensor that goes through index raising.
    """
    n = ms.dim
    if n < 3:
        raise UnsupportedDimensionError("the Weyl decomposition needs n >= 3")
    g, gi, ric, scal = ms.g, ms.g_inv, cb.ricci, cb.scalar
    rm = cb.rm
    rm_up = raise_indices(rm, gi, range(4))
    ric_up = _ein("ia...,jb...,ab...->ij...", gi, gi, ric)

    def pieces(metric, ricci):
        gg = 0.5 * kulkarni_nomizu(metric, metric)
        rg = kulkarni_nomizu(ricci, metric)
        traceless = ricci - scal * metric / n
        u = scal * gg / (n * (n - 1))
        v = (rg - (2 / n) * scal * gg) / (n - 2)
        w = -rg / (n - 2) + scal * gg / ((n - 1) * (n - 2))
        return traceless, u, v, w

    traceless, u_part, v_part, w_lin = pieces(g, ric)
    _, u_up, v_up, w_lin_up = pieces(gi, ric_up)
    weyl = rm + w_lin
    weyl_up = rm_up + w_lin_up

    def dot(a, b):
        return (a * b).sum(axis=(0, 1, 2, 3))

    return Decomposition(
        weyl=weyl,
        v_part=v_part,
        u_part=u_part,
        traceless_ricci=traceless,
        norm_rm=dot(rm, rm_up),
        norm_rm_traceless=dot(rm - u_part, rm_up - u_up),
        norm_weyl=dot(weyl, weyl_up),
        norm_v=dot(v_part, v_up),
        norm_u=dot(u_part, u_up),
    )


# ---------------------------------------------------------------------------
# Covariant derivative


def covariant_derivative(t: np.ndarray, rank: tuple[int, int], ms: MetricState) -> np.ndarray:
    """``nabla T`` with the new covariant slot appended after the existing ones.

    ``t`` has ``rank[0]`` contravariant slots followed by ``rank[1]`` covariant
    ones. Each upper slot picks up ``+Gamma^a_{m u} T^{..u..}``, each lower
    slot ``-Gamma^u_{m b} T_{..u..}``.
    """
    r, s = rank
    total = r + s
    if t.ndim != total + ms.dim:
        raise ValueError(f"tensor of rank {rank} has wrong number of axes {t.ndim}")
    out = np.moveaxis(gradient(t, ms.grid), 0, total)
    gam = ms.christoffel
    idx = LETTERS[:total]
    for slot in range(total):
        src = idx[:slot] + "y" + idx[slot + 1 :]
        if slot < r:
            out += _ein(f"{src}...,{idx[slot]}zy...->{idx}z...", t, gam)
        else:
            out -= _ein(f"{src}...,yz{idx[slot]}...->{idx}z...", t, gam)
    return out


def covariant_derivative_along(t: np.ndarray, rank: tuple[int, int], ms: MetricState, m: int) -> np.ndarray:
    """``nabla_m T`` for one fixed direction ``m``; same slot layout as ``t``."""
    r, s = rank
    total = r + s
    out = partial_derivative(t, m, ms.grid)
    gam_m = ms.christoffel[:, m]  # [a, y] = Gamma^a_{m y}
    idx = LETTERS[:total]
    for slot in range(total):
        src = idx[:slot] + "y" + idx[slot + 1 :]
        if slot < r:
            out += _ein(f"{src}...,{idx[slot]}y...->{idx}...", t, gam_m)
        else:
            out -= _ein(f"{src}...,y{idx[slot]}...->{idx}...", t, gam_m)
    return out


def metric_compatibility_residual(ms: MetricState) -> float:
    return float(np.max(np.abs(covariant_derivative(ms.g, (0, 2), ms))))


# ---------------------------------------------------------------------------
# Identity residuals


def _sup(a: np.ndarray) -> float:
    return float(np.max(np.abs(a))) if a.size else 0.0


def smooth_test_field(
    grid: GridSpec, components: tuple[int, ...], seed: int, modes: int = 1, rows: np.ndarray | None = None
) -> np.ndarray:
    """Seeded band-limited trigonometric field used to probe identities.

    ``rows`` restricts axis 0 to the given node indices of ``grid`` (wrapped
    periodically), so a slab sees exactly the values of the full-grid field.
    """
    rng = np.random.default_rng(seed)
    kvecs = [k for k in itertools.product(range(modes + 1), repeat=grid.dim) if any(k)]
    ncomp = int(np.prod(components))
    coef = rng.normal(size=(ncomp, len(kvecs), 2)) / (1.0 + np.array([sum(k) for k in kvecs]))[None, :, None]
    coords = list(grid.coordinates())
    shape = grid.shape
    if rows is not None:
        rows = np.asarray(rows) % grid.points[0]
        coords[0] = (rows * grid.spacing[0]).reshape((-1,) + (1,) * (grid.dim - 1))
        shape = (len(rows),) + shape[1:]
    out = np.zeros((ncomp, int(np.prod(shape))))
    chunk = 8
    for c0 in range(0, len(kvecs), chunk):
        basis = []
        for kvec in kvecs[c0 : c0 + chunk]:
            phase = sum(2 * np.pi * k * x / L for k, x, L in zip(kvec, coords, grid.periods))
            phase = np.broadcast_to(phase, shape).ravel()
            basis += [np.cos(phase), np.sin(phase)]
        out += coef[:, c0 : c0 + chunk].reshape(ncomp, -1) @ np.array(basis)
    return out.reshape(tuple(components) + shape)


def algebraic_residuals(cb: CurvatureBundle, ms: MetricState) -> dict[str, float]:
    """Sup-norm residuals of the pointwise curvature identities."""
    mixed, low = cb.riemann_mixed, cb.riemann_low
    rest = tuple(range(4, low.ndim))
    cyc = lambda t, p: np.transpose(t, p + rest)  # noqa: E731
    res = {
        # R^l_{ijk} + R^l_{jki} + R^l_{kij}
        "first_bianchi_mixed": _sup(mixed + cyc(mixed, (0, 3, 1, 2)) + cyc(mixed, (0, 2, 3, 1))),
        # R_{ijkl} + R_{jkil} + R_{kijl}
        "first_bianchi_low": _sup(low + cyc(low, (2, 0, 1, 3)) + cyc(low, (1, 2, 0, 3))),
        "antisymmetry_mixed": _sup(mixed + _swap(mixed, 1, 2)),
        "antisymmetry_ij": _sup(low + _swap(low, 0, 1)),
        "antisymmetry_kl": _sup(low + _swap(low, 2, 3)),
        "pair_symmetry": _sup(low - cyc(low, (2, 3, 0, 1))),
        "ricci_symmetry": cb.ricci_asymmetry,
        "scalar_double_trace": _sup(
            cb.scalar - _ein("ik...,jl...,ijkl...->...", ms.g_inv, ms.g_inv, cb.rm)
        ),
    }
    dec = cb.decomposition
    if dec is not None:
        n = ms.dim
        res["decomposition_exact"] = _sup(dec.weyl + dec.v_part + dec.u_part - cb.rm)
        res["norm_u_identity"] = _sup(dec.norm_u - 2 * cb.scalar**2 / (n * (n - 1)))
        res["orthogonality_rm"] = _sup(dec.norm_rm - dec.norm_rm_traceless - dec.norm_u)
        res["orthogonality_traceless"] = _sup(dec.norm_rm_traceless - dec.norm_weyl - dec.norm_v)
        res["traceless_ricci_trace"] = _sup(_ein("ij...,ij...->...", ms.g_inv, dec.traceless_ricci))
    return res


def _nabla_riemann_slice(mixed: np.ndarray, ms: MetricState, d: int, a: int, b: int) -> np.ndarray:
    """``nabla_d R^l_{abk}`` for all (l, k) with the pair (a, b) held fixed."""
    gam_d = ms.christoffel[:, d]  # [p, y] = Gamma^p_{d y}
    sl = mixed[:, a, b]
    out = partial_derivative(sl, d, ms.grid)
    out += _ein("yk...,ly...->lk...", sl, gam_d)
    out -= _ein("ly...,yk...->lk...", sl, gam_d)
    out -= _ein("y...,lyk...->lk...", gam_d[:, a], mixed[:, :, b])
    out -= _ein("y...,lyk...->lk...", gam_d[:, b], mixed[:, a])
    return out


def second_bianchi_residual(cb: CurvatureBundle, ms: MetricState) -> np.ndarray:
    """``nabla_m R^l_{ijk} + nabla_i R^l_{jmk} + nabla_j R^l_{mik}`` for i<j<m.

    The cyclic sum runs over the antisymmetric pair of the mixed tensor and
    the derivative slot. Only increasing triples are formed; the sum is
    totally antisymmetric in them. Output axes: [triple, l, k].
    """
    n = ms.dim
    triples = list(itertools.combinations(range(n), 3))
    if not triples:
        return np.zeros((0, n, n) + ms.grid.shape)
    mixed = cb.riemann_mixed
    parts = []
    for i, j, m in triples:
        acc = _nabla_riemann_slice(mixed, ms, m, i, j)
        acc += _nabla_riemann_slice(mixed, ms, i, j, m)
        acc += _nabla_riemann_slice(mixed, ms, j, m, i)
        parts.append(acc)
    return np.stack(parts)


def contracted_bianchi_residual(cb: CurvatureBundle, ms: MetricState) -> np.ndarray:
    """``2 R^s_{l;s} - R_{;l}``."""
    ric_mixed = _ein("is...,il...->sl...", ms.g_inv, cb.ricci)
    d = covariant_derivative(ric_mixed, (1, 1), ms)
    div = _ein("sls...->l...", d)
    return 2 * div - gradient(cb.scalar, ms.grid)


def _commutators(t: np.ndarray, rank: tuple[int, int], ms: MetricState):
    """Yield ``((a, b), T_{;a;b} - T_{;b;a})`` for every pair a < b.

    In the second derivative the correction on the first derivative slot is
    ``-Gamma^y_{ba} T_{;y}``, symmetric in (a, b) for the torsion-free
    connection, so it drops out of the commutator and is not formed.
    """
    first = [covariant_derivative_along(t, rank, ms, a) for a in range(ms.dim)]
    for a, b in itertools.combinations(range(ms.dim), 2):
        yield (a, b), covariant_derivative_along(first[a], rank, ms, b) - covariant_derivative_along(
            first[b], rank, ms, a
        )


def probe_fields(grid: GridSpec, seed: int = 0, rows: np.ndarray | None = None) -> dict[str, np.ndarray]:
    """Smooth test fields for the commutator identities."""
    n = grid.dim
    return {
        "vector": smooth_test_field(grid, (n,), seed, rows=rows),
        "covector": smooth_test_field(grid, (n,), seed + 1, rows=rows),
        "tensor": smooth_test_field(grid, (n, n, n), seed + 2, rows=rows),
    }


def ricci_formula_residuals(
    cb: CurvatureBundle, ms: MetricState, seed: int = 0, probes: dict[str, np.ndarray] | None = None
) -> dict[str, np.ndarray]:
    """Commutators of second covariant derivatives against the curvature terms.

    Each output stacks one residual per index pair (a < b) on axis 0:

    * vector ``v^i_{;a;b} - v^i_{;b;a} + v^j R^i_{abj}``
    * covector ``v_{k;a;b} - v_{k;b;a} - v_l R^l_{abk}``
    * tensor ``T^i_{jk;a;b} - T^i_{jk;b;a} + T^s_{jk} R^i_{abs} - T^i_{sk} R^s_{abj} - T^i_{js} R^s_{abk}``
    """
    probes = probe_fields(ms.grid, seed) if probes is None else probes
    mixed = cb.riemann_mixed
    out = {"ricci_formula_vector": [], "ricci_formula_covector": [], "ricci_formula_tensor": []}
    v = probes["vector"]
    for (a, b), comm in _commutators(v, (1, 0), ms):
        out["ricci_formula_vector"].append(comm + _ein("j...,ij...->i...", v, mixed[:, a, b]))
    w = probes["covector"]
    for (a, b), comm in _commutators(w, (0, 1), ms):
        out["ricci_formula_covector"].append(comm - _ein("l...,lk...->k...", w, mixed[:, a, b]))
    t3 = probes["tensor"]
    for (a, b), comm in _commutators(t3, (1, 2), ms):
        r_ab = mixed[:, a, b]  # [p, q] = R^p_{abq}
        comm += _ein("sjk...,is...->ijk...", t3, r_ab)
        comm -= _ein("isk...,sj...->ijk...", t3, r_ab)
        comm -= _ein("ijs...,sk...->ijk...", t3, r_ab)
        out["ricci_formula_tensor"].append(comm)
    return {k: np.stack(v) for k, v in out.items()}


def differential_residual_fields(
    cb: CurvatureBundle, ms: MetricState, seed: int = 0, probes: dict[str, np.ndarray] | None = None
) -> dict[str, np.ndarray]:
    return {
        "second_bianchi": second_bianchi_residual(cb, ms),
        "contracted_bianchi": contracted_bianchi_residual(cb, ms),
        **ricci_formula_residuals(cb, ms, seed, probes),
    }


def differential_residuals(
    cb: CurvatureBundle, ms: MetricState, seed: int = 0, probes: dict[str, np.ndarray] | None = None
) -> dict[str, float]:
    return {k: _sup(v) for k, v in differential_residual_fields(cb, ms, seed, probes).items()}


def identity_residuals(cb: CurvatureBundle, ms: MetricState, seed: int = 0) -> dict[str, float]:
    """Every curvature identity, each reported separately as a sup-norm."""
    return {**algebraic_residuals(cb, ms), **differential_residuals(cb, ms, seed)}


# ---------------------------------------------------------------------------
# Axis-0 slabs
#
# Stencil results are exact copies of the full-grid values away from the cut
# rows, so a large grid can be processed slab by slab. Each derivative level
# eats STENCIL_HALO rows from both ends of a slab.

JET_HALO = 2 * STENCIL_HALO  # metric jets (g, dg, ddg)
DIFFERENTIAL_HALO = 3 * STENCIL_HALO  # one more derivative of curvature


def slab_grid(grid: GridSpec, rows: int) -> GridSpec:
    """Grid for a slab of ``rows`` axis-0 rows with the parent's exact spacing."""
    sub = GridSpec((max(rows, 8),) + grid.points[1:], (grid.periods[0],) + grid.periods[1:])
    object.__setattr__(sub, "points", (rows,) + grid.points[1:])
    object.__setattr__(sub, "spacing", grid.spacing)
    return sub


def take_rows(obj, start: int, stop: int, dim: int):
    """Restrict every grid-shaped array in ``obj`` to axis-0 rows ``start:stop``."""
    if isinstance(obj, np.ndarray):
        if obj.ndim < dim:
            return obj
        sl = (slice(None),) * (obj.ndim - dim) + (slice(start, stop),)
        return obj[sl]
    if isinstance(obj, dict):
        return {k: take_rows(v, start, stop, dim) for k, v in obj.items()}
    if isinstance(obj, GridSpec):
        return slab_grid(obj, stop - start)
    if hasattr(obj, "__dataclass_fields__"):
        changes = {}
        for f in fields(obj):
            v = getattr(obj, f.name)
            if isinstance(v, (np.ndarray, dict, GridSpec)) or hasattr(v, "__dataclass_fields__"):
                changes[f.name] = take_rows(v, start, stop, dim)
        return replace(obj, **changes)
    return obj


def crop_rows(obj, halo: int, dim: int):
    """Drop ``halo`` rows at both ends of grid axis 0 of every array in ``obj``."""
    if halo == 0:
        return obj
    rows = _rows_of(obj, dim)
    return take_rows(obj, halo, rows - halo, dim)


def _rows_of(obj, dim: int) -> int:
    if isinstance(obj, GridSpec):
        return obj.points[0]
    if isinstance(obj, np.ndarray):
        return obj.shape[obj.ndim - dim]
    if isinstance(obj, dict):
        return _rows_of(next(iter(obj.values())), dim)
    return obj.grid.points[0]


def iter_slabs(g: np.ndarray, grid: GridSpec, width: int, halo: int):
    """Yield ``(start, stop, rows, padded_g, padded_grid)`` covering axis 0.

    ``rows`` are the (periodically wrapped) parent indices of the padded slab,
    ``start - halo .. stop + halo``.
    """
    n0 = grid.points[0]
    ax = g.ndim - grid.dim
    for start in range(0, n0, width):
        stop = min(start + width, n0)
        rows = np.arange(start - halo, stop + halo) % n0
        yield start, stop, rows, np.take(g, rows, axis=ax), slab_grid(grid, len(rows))


def _merge_max(acc: dict[str, float], new: dict[str, float]) -> None:
    for k, v in new.items():
        acc[k] = max(acc.get(k, 0.0), v)


def streamed_identity_residuals(
    g: np.ndarray,
    grid: GridSpec,
    *,
    width: int = 8,
    chunk_rows: int = 2,
    seed: int = 0,
    algebraic: bool = True,
    differential: bool = True,
) -> dict[str, float]:
    """:func:`identity_residuals` of the metric ``g`` without holding full-grid curvature.

    The grid is cut into axis-0 slabs of ``width`` rows. Pointwise algebra on
    a slab runs ``chunk_rows`` rows at a time. The result matches the dense
    computation up to round-off.
    """
    n = grid.dim
    halo = DIFFERENTIAL_HALO if differential else JET_HALO
    width = min(width, grid.points[0])
    out: dict[str, float] = {}
    for start, stop, rows, gp, gridp in iter_slabs(g, grid, width, halo):
        ms_pad = metric_state(gp, gridp)
        ms = crop_rows(ms_pad, JET_HALO, n)  # jets valid here
        del ms_pad
        extra = halo - JET_HALO
        if algebraic:
            for r0 in range(extra, extra + stop - start, chunk_rows):
                part = take_rows(ms, r0, min(r0 + chunk_rows, extra + stop - start), n)
                _merge_max(out, algebraic_residuals(curvature_bundle(part), part))
        if differential:
            cb = curvature_bundle(ms, decompose=False)
            probes = probe_fields(grid, seed, rows=rows[JET_HALO : len(rows) - JET_HALO])
            fields_ = differential_residual_fields(cb, ms, seed, probes)
            _merge_max(out, {k: _sup(crop_rows(v, extra, n)) for k, v in fields_.items()})
    return out
