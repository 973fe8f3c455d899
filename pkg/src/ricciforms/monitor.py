"""Norms of the evolving form, the |xi|^2 evolution residual, and monotonicity verdicts.

The residual checked along a trajectory is

    r = d/dt |xi|^2 - ( Delta |xi|^2 - 2 xi^{I;j} xi_{I;j} - p(p-1) xi_{ijJ} R^{ij}_{kl} xi^{klJ} )

with the time derivative taken by finite differences of stored ``|xi|^2``
fields over three consecutive steps of equal size (centered in the interior,
second-order one-sided at the two ends of a run).
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, fields, replace

import numpy as np

from .curvature import LETTERS, MetricState, CurvatureBundle, covariant_derivative, full_contraction, raise_indices
from .flow import FlowState, _rough_laplacian_full
from .forms import PForm, pointwise_norm_sq, to_full
from .grid import einsum_grid as _ein, integrate_scalar
from .spectral import curvature_operator_bound, pinch_report

DT_RTOL = 1e-9

CSV_COLUMNS = (
    "t",
    "l2",
    "linf",
    "weighted_l2",
    "weighted_linf",
    "k",
    "L",
    "W",
    "margin",
    "huisken_ratio",
    "eq7_residual",
    "R_min",
    "R_max",
    "min_eig_g",
)

CLAIMS = {
    "thm1_l2": "l2_norm",
    "thm1_linf": "linf_norm",
    "thm3_l2": "weighted_l2",
    "thm3_linf": "weighted_linf",
}


class Eq7WindowError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Norms


def l2_norm(xi: PForm, ms: MetricState) -> float:
    return math.sqrt(max(integrate_scalar(pointwise_norm_sq(xi, ms), ms.sqrt_det_g, ms.grid), 0.0))


def linf_norm(xi: PForm, ms: MetricState) -> float:
    return math.sqrt(max(float(np.max(pointwise_norm_sq(xi, ms))), 0.0))


# ---------------------------------------------------------------------------
# Evolution residual


def gradient_norm_sq(xi: PForm, ms: MetricState) -> np.ndarray:
    """``xi^{I;j} xi_{I;j}`` summed over all index tuples."""
    p = xi.degree
    full = to_full(xi) if p else xi.components[0]
    nabla = covariant_derivative(full, (0, p), ms)
    return full_contraction(nabla, nabla, ms.g_inv)


def curvature_term(xi: PForm, ms: MetricState, cb: CurvatureBundle) -> np.ndarray:
    """``xi_{ijJ} R^{ij}_{kl} xi^{klJ}`` (zero for p < 2)."""
    p = xi.degree
    if p < 2:
        return np.zeros(ms.grid.shape)
    full = to_full(xi)
    up = raise_indices(full, ms.g_inv, range(p))
    r_up = _ein("ap...,bq...,pqkl...->abkl...", ms.g_inv, ms.g_inv, cb.riemann_low)
    rest = LETTERS[4 : 4 + p - 2]
    return _ein(f"ij{rest}...,ijkl...,kl{rest}...->...", full, r_up, up)


def eq7_spatial_rhs(xi: PForm, ms: MetricState, cb: CurvatureBundle, curvature: bool = True) -> np.ndarray:
    """Right-hand side of the ``|xi|^2`` evolution at one instant."""
    p = xi.degree
    rhs = _rough_laplacian_full(pointwise_norm_sq(xi, ms), 0, ms) - 2.0 * gradient_norm_sq(xi, ms)
    if curvature and p >= 2:
        rhs = rhs - p * (p - 1) * curvature_term(xi, ms, cb)
    return rhs


def _time_derivative(f: list[np.ndarray], times: list[float], at: int) -> np.ndarray:
    dt_a, dt_b = times[1] - times[0], times[2] - times[1]
    if not (dt_a > 0 and dt_b > 0) or abs(dt_a - dt_b) > DT_RTOL * max(dt_a, dt_b):
        raise Eq7WindowError(f"window steps differ: {dt_a!r} vs {dt_b!r}")
    dt = 0.5 * (dt_a + dt_b)
    if at == 1:
        return (f[2] - f[0]) / (2 * dt)
    if at == 0:
        return (-3 * f[0] + 4 * f[1] - f[2]) / (2 * dt)
    if at == 2:
        return (3 * f[2] - 4 * f[1] + f[0]) / (2 * dt)
    raise ValueError("at must be 0, 1 or 2")


def eq7_residual_field(window: list[FlowState], at: int = 1, curvature: bool = True) -> np.ndarray:
    """Pointwise residual at ``window[at]`` from three consecutive equal-step states."""
    if len(window) != 3:
        raise Eq7WindowError("need exactly three states")
    f = [pointwise_norm_sq(s.xi, s.ms) for s in window]
    ddt = _time_derivative(f, [s.t for s in window], at)
    mid = window[at]
    return ddt - eq7_spatial_rhs(mid.xi, mid.ms, mid.cb, curvature)


def eq7_residual(window: list[FlowState], at: int = 1, curvature: bool = True) -> float:
    return float(np.max(np.abs(eq7_residual_field(window, at, curvature))))


# ---------------------------------------------------------------------------
# Records and the trajectory observer


@dataclass(frozen=True)
class TimeSeriesRecord:
    t: float
    l2_norm: float
    linf_norm: float
    weighted_l2: float
    weighted_linf: float
    k_used: float
    L_val: float
    W_val: float
    theorem1_margin: float
    huisken_ratio_max: float
    eq7_residual_sup: float
    scalar_curv_min: float
    scalar_curv_max: float
    min_eig_g: float
    step: int = 0

    def row(self) -> tuple[float, ...]:
        """Values in :data:`CSV_COLUMNS` order."""
        return (
            self.t,
            self.l2_norm,
            self.linf_norm,
            self.weighted_l2,
            self.weighted_linf,
            self.k_used,
            self.L_val,
            self.W_val,
            self.theorem1_margin,
            self.huisken_ratio_max,
            self.eq7_residual_sup,
            self.scalar_curv_min,
            self.scalar_curv_max,
            self.min_eig_g,
        )


class Monitor:
    """Observer for :func:`ricciforms.flow.run_flow`.

    Every accepted step contributes to the trajectory-wide curvature bound k
    and to the rolling window of ``|xi|^2`` fields; records are kept for steps
    that are multiples of ``record_every``. Call :meth:`finalize` after the
    run to fill the end-point residual and the weighted norms.
    """

    def __init__(self, record_every: int = 1, eq7: bool = True, pinch: bool = True):
        if record_every < 1:
            raise ValueError("record_every must be >= 1")
        self.record_every = record_every
        self.eq7 = eq7
        self.pinch = pinch
        self.k_min = math.inf
        self.degree: int | None = None
        self._records: list[TimeSeriesRecord] = []
        self._window: deque = deque(maxlen=3)  # (step, t, |xi|^2)
        self._pending: dict[int, tuple[int, np.ndarray]] = {}  # step -> (record index, spatial rhs)
        self._steps_seen = 0
        self._finalized = False

    @property
    def records(self) -> list[TimeSeriesRecord]:
        return list(self._records)

    def __call__(self, state: FlowState) -> None:
        if self._finalized:
            raise RuntimeError("monitor already finalized")
        step = state.step_count
        ms, cb, xi = state.ms, state.cb, state.xi
        self.degree = xi.degree
        norm_sq = pointwise_norm_sq(xi, ms)
        self._window.append((step, state.t, norm_sq))
        self._steps_seen += 1
        record = step % self.record_every == 0

        if record and self.pinch:
            rep = pinch_report(cb, ms, state.t)
            k_step = rep.k_bound
            big_l, big_w, margin, ratio = rep.L_val, rep.W_val, rep.theorem1_margin, rep.huisken_ratio_max
        else:
            k_step = curvature_operator_bound(cb, ms)
            big_l = big_w = margin = ratio = math.nan
        self.k_min = min(self.k_min, k_step)

        if record:
            l2 = math.sqrt(max(integrate_scalar(norm_sq, ms.sqrt_det_g, ms.grid), 0.0))
            linf = math.sqrt(max(float(np.max(norm_sq)), 0.0))
            rec = TimeSeriesRecord(
                t=state.t,
                l2_norm=l2,
                linf_norm=linf,
                weighted_l2=math.nan,
                weighted_linf=math.nan,
                k_used=math.nan,
                L_val=big_l,
                W_val=big_w,
                theorem1_margin=margin,
                huisken_ratio_max=ratio,
                eq7_residual_sup=math.nan,
                scalar_curv_min=float(cb.scalar.min()),
                scalar_curv_max=float(cb.scalar.max()),
                min_eig_g=ms.min_eig_g,
                step=step,
            )
            self._records.append(rec)
            if self.eq7:
                self._pending[step] = (len(self._records) - 1, eq7_spatial_rhs(xi, ms, cb))
        self._resolve(final=False)

    def _resolve(self, final: bool) -> None:
        if len(self._window) < 3:
            return
        steps = [w[0] for w in self._window]
        if steps != list(range(steps[0], steps[0] + 3)):
            return
        targets = [(1, steps[1])]
        if steps[0] == 0:
            targets.append((0, 0))
        if final:
            targets.append((2, steps[2]))
        for at, step in targets:
            if step not in self._pending:
                continue
            idx, rhs = self._pending.pop(step)
            try:
                ddt = _time_derivative([w[2] for w in self._window], [w[1] for w in self._window], at)
                val = float(np.max(np.abs(ddt - rhs)))
            except Eq7WindowError:
                val = math.nan
            self._records[idx] = replace(self._records[idx], eq7_residual_sup=val)
        # anything older than the window can no longer be resolved
        for step in [s for s in self._pending if s < steps[0]]:
            del self._pending[step]

    def finalize(self) -> list[TimeSeriesRecord]:
        """Resolve the end-point residual and fill the weighted columns."""
        if not self._finalized:
            self._resolve(final=True)
            self._pending.clear()
            k = self.k_min if math.isfinite(self.k_min) else math.nan
            p = self.degree or 0
            out = []
            for rec in self._records:
                w = math.exp(k * p * (p - 1) * rec.t) if p >= 2 else 1.0
                out.append(
                    replace(rec, k_used=k, weighted_l2=w * rec.l2_norm, weighted_linf=w * rec.linf_norm)
                )
            self._records = out
            self._finalized = True
        return self.records


# ---------------------------------------------------------------------------
# Verdicts


@dataclass(frozen=True)
class MonotonicityVerdict:
    claim: str
    holds: bool
    worst_violation: float
    tolerance: float
    pair: tuple[float, float] | None = None  # (s, t) realising the worst increase
    vacuous: bool = False

    def as_dict(self) -> dict:
        return {
            "claim": self.claim,
            "holds": self.holds,
            "worst_violation": self.worst_violation,
            "tolerance": self.tolerance,
            "pair": None if self.pair is None else list(self.pair),
            "vacuous": self.vacuous,
        }


def default_tolerance(initial: float) -> float:
    return 1e-8 + 1e-6 * abs(initial)


def check_monotone(records: list[TimeSeriesRecord], claim: str, tolerance: float | None = None) -> MonotonicityVerdict:
    """Worst forward increase ``max_{s<t} (q_t - q_s)`` of the claimed series."""
    if claim not in CLAIMS:
        raise ValueError(f"unknown claim {claim!r}; expected one of {sorted(CLAIMS)}")
    if not records:
        raise ValueError("empty series")
    q = [getattr(r, CLAIMS[claim]) for r in records]
    times = [r.t for r in records]
    tol = default_tolerance(q[0]) if tolerance is None else float(tolerance)
    if any(not math.isfinite(v) for v in q):
        return MonotonicityVerdict(claim, False, math.nan, tol)
    if len(q) == 1:
        return MonotonicityVerdict(claim, True, 0.0, tol, None, vacuous=True)
    worst, pair = 0.0, None
    best_idx = 0
    for i in range(1, len(q)):
        inc = q[i] - q[best_idx]
        if inc > worst:
            worst, pair = inc, (times[best_idx], times[i])
        if q[i] < q[best_idx]:
            best_idx = i
    return MonotonicityVerdict(claim, worst <= tol, worst, tol, pair)


def hypothesis_intervals(records: list[TimeSeriesRecord]) -> list[tuple[float, float]]:
    """Maximal runs of records with ``L >= 0`` and a non-negative pinching margin."""
    out: list[tuple[float, float]] = []
    start = None
    last = None
    for r in records:
        ok = r.L_val >= 0 and r.theorem1_margin >= 0
        if ok:
            start = r.t if start is None else start
            last = r.t
        elif start is not None:
            out.append((start, last))
            start = None
    if start is not None:
        out.append((start, last))
    return out


def all_verdicts(records: list[TimeSeriesRecord]) -> dict[str, MonotonicityVerdict]:
    return {claim: check_monotone(records, claim) for claim in CLAIMS}


def record_fields() -> list[str]:
    return [f.name for f in fields(TimeSeriesRecord)]
