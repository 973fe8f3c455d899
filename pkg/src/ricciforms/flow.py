"""Coupled Ricci flow of the metric and heat flow of a p-form, by classical RK4.

``d g_ij / dt = -2 R_ij`` and ``d xi / dt = Delta_d xi`` are advanced together
with the same stages; every stage rebuilds the metric jets and curvature.
``Delta_d`` is evaluated through the Weitzenboeck expression

    Delta_d xi_I = g^{jk} xi_{I;j;k} - sum_s xi_{..a..} R^a_{i_s}
                   - sum_{s<t} xi_{..a..b..} R^{ab}_{i_s i_t},

``R^{ab}_{ij} = g^{ap} g^{bq} R_{pqij}`` with ``R_{pqij}`` the ``riemann_low``
tensor. This equals ``d delta + delta d`` for the codifferential sign in
:data:`ricciforms.forms.CODIFF_SIGN` and is negative semidefinite, so the
form flow is diffusive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable

import numpy as np

from .curvature import (
    LETTERS,
    CurvatureBundle,
    DegenerateMetricError,
    MetricState,
    covariant_derivative_along,
    curvature_bundle,
    metric_state,
)
from .forms import PForm, from_full, to_full
from .grid import einsum_grid as _ein


class FlowSingularity(RuntimeError):
    """The metric left the SPD cone (or went non-finite) during a step."""

    def __init__(self, t: float, node: tuple[int, ...], min_eig: float, detail: str = ""):
        super().__init__(
            f"flow singularity at t={t:.6g}: smallest metric eigenvalue {min_eig:.3e} at node {node}"
            + (f" ({detail})" if detail else "")
        )
        self.t = t
        self.node = node
        self.min_eig = min_eig


@dataclass(frozen=True)
class StepControl:
    """Time-step policy.

    ``dt = cfl * min(h)^2 / (2 n max(1, sup|Rm|))``, re-evaluated after every
    step. With ``dyadic`` the step is snapped to ``dt0 / 2^j`` where ``dt0``
    divides ``t_end`` and ``j`` never decreases, so the run lands exactly on
    ``t_end`` and consecutive steps usually share one dt.
    """

    t_end: float
    cfl: float = 0.2
    max_steps: int = 1_000_000
    spd_floor: float = 1e-8
    dyadic: bool = True

    def __post_init__(self):
        if not (0 < self.cfl <= 1):
            raise ValueError(f"cfl must lie in (0, 1], got {self.cfl}")
        if not (self.t_end >= 0 and math.isfinite(self.t_end)):
            raise ValueError(f"t_end must be finite and >= 0, got {self.t_end}")
        if self.max_steps < 0:
            raise ValueError("max_steps must be >= 0")
        if self.spd_floor < 0:
            raise ValueError("spd_floor must be >= 0")


@dataclass(frozen=True)
class FlowState:
    t: float
    ms: MetricState
    xi: PForm
    cb: CurvatureBundle
    step_count: int = 0


def _bundle(ms: MetricState, full: bool) -> CurvatureBundle:
    return curvature_bundle(ms, decompose=full)


def _metric(g: np.ndarray, grid, spd_floor: float, t: float) -> MetricState:
    try:
        return metric_state(g, grid, spd_floor)
    except DegenerateMetricError as exc:
        raise FlowSingularity(t, exc.node, exc.min_eig, str(exc)) from exc


def make_state(g: np.ndarray, xi: PForm, t: float = 0.0, spd_floor: float = 0.0, step_count: int = 0) -> FlowState:
    ms = _metric(g, xi.grid, spd_floor, t)
    return FlowState(t, ms, xi, _bundle(ms, True), step_count)


# ---------------------------------------------------------------------------
# Right-hand sides


def ricci_rhs(ms: MetricState, cb: CurvatureBundle) -> np.ndarray:
    return -2.0 * cb.ricci


def _rough_laplacian_full(full: np.ndarray, p: int, ms: MetricState) -> np.ndarray:
    """``g^{jk} T_{I;j;k}`` for a covariant rank-p tensor.

    In the second derivative the correction on the first derivative slot,
    contracted with ``g^{jk}``, is ``-Gamma^y A_y`` with ``Gamma^y = g^{jk} Gamma^y_{jk}``.
    """
    n = ms.dim
    rank = (0, p)
    first = [covariant_derivative_along(full, rank, ms, j) for j in range(n)]
    gam_trace = _ein("jk...,yjk...->y...", ms.g_inv, ms.christoffel)
    out = np.zeros_like(full)
    for j in range(n):
        for k in range(n):
            out += ms.g_inv[j, k] * covariant_derivative_along(first[j], rank, ms, k)
    for y in range(n):
        out -= gam_trace[y] * first[y]
    return out


def rough_laplacian(xi: PForm, ms: MetricState) -> PForm:
    """``g^{jk} xi_{I;j;k}`` on the canonical components."""
    p = xi.degree
    full = to_full(xi) if p else xi.components[0]
    lap = _rough_laplacian_full(full, p, ms)
    return from_full(lap, xi.grid, p)


def weitzenboeck_laplacian(xi: PForm, ms: MetricState, cb: CurvatureBundle) -> PForm:
    p = xi.degree
    if p == 0:
        return rough_laplacian(xi, ms)
    full = to_full(xi)
    out = _rough_laplacian_full(full, p, ms)
    idx = LETTERS[:p]
    ric_mixed = _ein("ab...,bi...->ai...", ms.g_inv, cb.ricci)  # R^a_i
    for s in range(p):
        src = idx[:s] + "y" + idx[s + 1 :]
        out -= _ein(f"{src}...,y{idx[s]}...->{idx}...", full, ric_mixed)
    if p >= 2:
        r_up = _ein("ap...,bq...,pqij...->abij...", ms.g_inv, ms.g_inv, cb.riemann_low)  # R^{ab}_{ij}
        for s in range(p):
            for t in range(s + 1, p):
                src = list(idx)
                src[s], src[t] = "y", "z"
                out -= _ein(f"{''.join(src)}...,yz{idx[s]}{idx[t]}...->{idx}...", full, r_up)
    return from_full(out, xi.grid, p)


def heat_rhs(state: FlowState) -> PForm:
    return weitzenboeck_laplacian(state.xi, state.ms, state.cb)


# ---------------------------------------------------------------------------
# Time stepping


def sup_riemann_norm(cb: CurvatureBundle, ms: MetricState) -> float:
    return math.sqrt(max(float(np.max(cb.norm_rm_sq(ms))), 0.0))


def stable_dt(ms: MetricState, cb: CurvatureBundle, cfl: float) -> float:
    h = min(ms.grid.spacing)
    return cfl * h * h / (2 * ms.dim * max(1.0, sup_riemann_norm(cb, ms)))


def rk4_step(state: FlowState, dt: float, spd_floor: float = 0.0) -> FlowState:
    """One classical RK4 step of the coupled system; curvature rebuilt at every stage."""
    if not (dt > 0 or dt < 0):
        raise ValueError("dt must be non-zero")
    grid = state.ms.grid
    p = state.xi.degree

    def f(ms: MetricState, cb: CurvatureBundle, xi_c: np.ndarray):
        return ricci_rhs(ms, cb), weitzenboeck_laplacian(PForm(p, xi_c, grid), ms, cb).components

    g0, x0 = state.ms.g, state.xi.components
    k1g, k1x = f(state.ms, state.cb, x0)
    ms2 = _metric(g0 + 0.5 * dt * k1g, grid, spd_floor, state.t + 0.5 * dt)
    k2g, k2x = f(ms2, _bundle(ms2, False), x0 + 0.5 * dt * k1x)
    ms3 = _metric(g0 + 0.5 * dt * k2g, grid, spd_floor, state.t + 0.5 * dt)
    k3g, k3x = f(ms3, _bundle(ms3, False), x0 + 0.5 * dt * k2x)
    ms4 = _metric(g0 + dt * k3g, grid, spd_floor, state.t + dt)
    k4g, k4x = f(ms4, _bundle(ms4, False), x0 + dt * k3x)
    g1 = g0 + (dt / 6.0) * (k1g + 2.0 * k2g + 2.0 * k3g + k4g)
    x1 = x0 + (dt / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
    if not np.all(np.isfinite(x1)):
        raise FlowSingularity(state.t + dt, (), float("nan"), "form became non-finite")
    ms1 = _metric(g1, grid, spd_floor, state.t + dt)
    return FlowState(state.t + dt, ms1, PForm(p, x1, grid), _bundle(ms1, True), state.step_count + 1)


@dataclass
class FlowResult:
    final: FlowState
    steps: int
    dts: list[float] = field(default_factory=list)
    singularity: FlowSingularity | None = None

    @property
    def completed(self) -> bool:
        return self.singularity is None


Observer = Callable[[FlowState], None]


def _dyadic_dt(dt_raw: float, dt0: float, level: int) -> tuple[float, int]:
    while dt0 * 0.5**level > dt_raw:
        level += 1
    return dt0 * 0.5**level, level


def run_flow(initial: FlowState, ctrl: StepControl, observers: Iterable[Observer] = ()) -> FlowResult:
    """Step until ``t_end`` or ``max_steps``; observers see step 0 and every accepted step.

    A singularity stops the run and is returned with the last good state.
    """
    observers = list(observers)
    state = initial
    for obs in observers:
        obs(state)
    result = FlowResult(state, 0)
    t_end = ctrl.t_end
    dt0 = None
    level = 0
    while state.t < t_end and result.steps < ctrl.max_steps:
        dt_raw = stable_dt(state.ms, state.cb, ctrl.cfl)
        remaining = t_end - state.t
        if ctrl.dyadic:
            if dt0 is None:
                dt0 = remaining / math.ceil(remaining / dt_raw - 1e-12)
            dt, level = _dyadic_dt(dt_raw, dt0, level)
        else:
            dt = dt_raw
        last = dt >= remaining * (1 - 1e-9)
        dt = min(dt, remaining)
        try:
            new = rk4_step(state, dt, ctrl.spd_floor)
        except FlowSingularity as exc:
            result.singularity = exc
            break
        if last:
            new = replace(new, t=t_end)
        state = new
        result.final = state
        result.steps += 1
        result.dts.append(dt)
        for obs in observers:
            obs(state)
    return result

