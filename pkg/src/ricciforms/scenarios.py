"""Closed catalog of initial metrics and initial forms on the periodic box."""

from __future__ import annotations

import math
from dataclasses import dataclass
from math import comb
from typing import Any, Callable

import numpy as np

from .curvature import smooth_test_field
from .forms import PForm, exterior_derivative, multi_indices
from .grid import GridSpec


class ScenarioError(ValueError):
    """Bad scenario or form parameters; ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
        self.message = message


def _qualified(exc: ScenarioError, section: str) -> ScenarioError:
    if "." in exc.field:
        return exc
    return ScenarioError(f"{section}.{exc.field}", exc.message)


def _product_of_sines(grid: GridSpec, modes) -> np.ndarray:
    u = np.ones(grid.shape)
    for m, x, period in zip(modes, grid.coordinates(), grid.periods):
        if m:
            u = u * np.sin(2 * np.pi * m * x / period)
    return u


def _diag_metric(grid: GridSpec, diag) -> np.ndarray:
    n = grid.dim
    g = np.zeros((n, n) + grid.shape)
    for i in range(n):
        g[i, i] = diag[i]
    return g


def _int_vector(params, key, n, default):
    v = params.get(key, default)
    if isinstance(v, int) and not isinstance(v, bool):
        v = [v] * n
    if not isinstance(v, (list, tuple)) or len(v) != n or not all(isinstance(m, int) and not isinstance(m, bool) for m in v):
        raise ScenarioError(key, f"expected {n} integers, got {v!r}")
    return tuple(v)


def _real(params, key, default):
    v = params.get(key, default)
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ScenarioError(key, f"expected a finite number, got {v!r}")
    return float(v)


def flat_torus(grid: GridSpec, params: dict, seed: int) -> np.ndarray:
    return _diag_metric(grid, [np.ones(grid.shape)] * grid.dim)


def conformal_perturbation(grid: GridSpec, params: dict, seed: int) -> np.ndarray:
    """``g = exp(2u) delta`` with ``u = eps * prod_i sin(2 pi m_i x_i / L_i)`` (axes with m_i = 0 skipped)."""
    eps = _real(params, "eps", 0.1)
    if abs(eps) > 0.3:
        raise ScenarioError("eps", f"|eps| must be <= 0.3, got {eps}")
    modes = _int_vector(params, "modes", grid.dim, 1)
    u = eps * _product_of_sines(grid, modes)
    return _diag_metric(grid, [np.exp(2 * u)] * grid.dim)


def anisotropic_constant(grid: GridSpec, params: dict, seed: int) -> np.ndarray:
    a = params.get("a", [1.0] * grid.dim)
    if not isinstance(a, (list, tuple)) or len(a) != grid.dim:
        raise ScenarioError("a", f"expected {grid.dim} positive numbers, got {a!r}")
    if not all(isinstance(v, (int, float)) and not isinstance(v, bool) and v > 0 and math.isfinite(v) for v in a):
        raise ScenarioError("a", f"entries must be positive and finite, got {a!r}")
    return _diag_metric(grid, [np.full(grid.shape, float(v)) for v in a])


def random_smooth_perturbation(grid: GridSpec, params: dict, seed: int) -> np.ndarray:
    """``delta + eps * S`` with S symmetric, band-limited and ``max |S_ij| = 1``.

    Gershgorin gives a smallest eigenvalue of at least ``1 - n eps``, hence
    the bound ``eps < 1/n``.
    """
    n = grid.dim
    eps = _real(params, "eps", 0.1)
    if not 0 <= eps < 1.0 / n:
        raise ScenarioError("eps", f"eps must lie in [0, 1/{n}), got {eps}")
    modes = params.get("modes", 1)
    if isinstance(modes, bool) or not isinstance(modes, int) or not 1 <= modes <= 4:
        raise ScenarioError("modes", f"band limit must be an integer in 1..4, got {modes!r}")
    raw = smooth_test_field(grid, (n, n), seed, modes)
    s = 0.5 * (raw + np.swapaxes(raw, 0, 1))
    peak = float(np.max(np.abs(s)))
    if peak > 0:
        s = s / peak
    g = eps * s
    for i in range(n):
        g[i, i] += 1.0
    return g


@dataclass(frozen=True)
class Scenario:
    name: str
    build: Callable[[GridSpec, dict, int], np.ndarray]
    parameters: dict[str, Any]
    valid_range: str


CATALOG: dict[str, Scenario] = {
    s.name: s
    for s in (
        Scenario("flat_torus", flat_torus, {}, "always flat"),
        Scenario("conformal_perturbation", conformal_perturbation, {"eps": 0.1, "modes": 1}, "|eps| <= 0.3"),
        Scenario("anisotropic_constant", anisotropic_constant, {"a": "[1.0, ...]"}, "a_i > 0"),
        Scenario(
            "random_smooth_perturbation", random_smooth_perturbation, {"eps": 0.1, "modes": 1}, "0 <= eps < 1/n"
        ),
    )
}

SCENARIO_KEYS = {
    "flat_torus": set(),
    "conformal_perturbation": {"eps", "modes"},
    "anisotropic_constant": {"a"},
    "random_smooth_perturbation": {"eps", "modes"},
}


def build_metric(name: str, grid: GridSpec, params: dict, seed: int = 0) -> np.ndarray:
    if name not in CATALOG:
        raise ScenarioError("scenario.name", f"unknown scenario {name!r}; known: {sorted(CATALOG)}")
    unknown = set(params) - SCENARIO_KEYS[name]
    if unknown:
        raise ScenarioError(f"scenario.{sorted(unknown)[0]}", f"not a parameter of {name}")
    try:
        return CATALOG[name].build(grid, params, seed)
    except ScenarioError as exc:
        raise _qualified(exc, "scenario") from exc


# ---------------------------------------------------------------------------
# Initial forms

FORM_KEYS = {
    "fourier_mode": {"component", "mode", "amplitude", "phase"},
    "closed": {"amplitude", "modes"},
    "random": {"amplitude", "modes"},
}


def _normalise(comps: np.ndarray, amplitude: float) -> np.ndarray:
    peak = float(np.max(np.abs(comps)))
    return comps * (amplitude / peak) if peak > 0 else comps


def fourier_mode_form(grid: GridSpec, p: int, params: dict) -> PForm:
    """``A cos(2 pi k.x / L) dx^I`` (or sin) on a single increasing index tuple I."""
    n = grid.dim
    comp = params.get("component", list(range(p)))
    if not isinstance(comp, (list, tuple)) or tuple(comp) not in multi_indices(n, p):
        raise ScenarioError("form.component", f"expected a strictly increasing {p}-tuple below {n}, got {comp!r}")
    mode = _int_vector(params, "mode", n, [1] + [0] * (n - 1))
    amp = _real(params, "amplitude", 1.0)
    phase = params.get("phase", "cos")
    if phase not in ("cos", "sin"):
        raise ScenarioError("form.phase", f"expected 'cos' or 'sin', got {phase!r}")
    arg = sum(2 * np.pi * k * x / period for k, x, period in zip(mode, grid.coordinates(), grid.periods))
    wave = np.broadcast_to(np.cos(arg) if phase == "cos" else np.sin(arg), grid.shape)
    comps = np.zeros((comb(n, p),) + grid.shape)
    comps[multi_indices(n, p).index(tuple(comp))] = amp * wave
    return PForm(p, comps, grid)


def _band(params) -> int:
    modes = params.get("modes", 1)
    if isinstance(modes, bool) or not isinstance(modes, int) or not 1 <= modes <= 4:
        raise ScenarioError("form.modes", f"band limit must be an integer in 1..4, got {modes!r}")
    return modes


def random_form(grid: GridSpec, p: int, params: dict, seed: int) -> PForm:
    amp = _real(params, "amplitude", 1.0)
    comps = smooth_test_field(grid, (comb(grid.dim, p),), seed + 7919, _band(params))
    return PForm(p, _normalise(comps, amp), grid)


def closed_form(grid: GridSpec, p: int, params: dict, seed: int) -> PForm:
    """``d phi`` for a seeded band-limited (p-1)-form ``phi``, scaled to sup amplitude."""
    if p < 1:
        raise ScenarioError("form.kind", "a closed initial form needs degree >= 1")
    amp = _real(params, "amplitude", 1.0)
    phi = smooth_test_field(grid, (comb(grid.dim, p - 1),), seed + 104729, _band(params))
    xi = exterior_derivative(PForm(p - 1, phi, grid))
    return PForm(p, _normalise(xi.components, amp), grid)


def build_form(kind: str, grid: GridSpec, p: int, params: dict, seed: int = 0) -> PForm:
    if kind not in FORM_KEYS:
        raise ScenarioError("form.kind", f"unknown initial form {kind!r}; known: {sorted(FORM_KEYS)}")
    unknown = set(params) - FORM_KEYS[kind]
    if unknown:
        raise ScenarioError(f"form.{sorted(unknown)[0]}", f"not a parameter of {kind}")
    try:
        if kind == "fourier_mode":
            return fourier_mode_form(grid, p, params)
        if kind == "closed":
            return closed_form(grid, p, params, seed)
        return random_form(grid, p, params, seed)
    except ScenarioError as exc:
        raise _qualified(exc, "form") from exc
