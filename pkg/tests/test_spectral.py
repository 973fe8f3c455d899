import math
from fractions import Fraction

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, strategies as st

from ricciforms.curvature import curvature_bundle, metric_state
from ricciforms.grid import GridSpec
from ricciforms.scenarios import anisotropic_constant, conformal_perturbation, flat_torus, random_smooth_perturbation
from ricciforms.spectral import (
    JacobiConvergenceError,
    NotPositiveDefiniteError,
    curvature_operator_bound,
    curvature_operator_spectrum,
    delta_n,
    huisken_pinch,
    jacobi_eigh,
    pinch_report,
    ricci_min_eigenvalue,
    sym_eigensolve,
    theorem1_margin,
    theorem1_margin_field,
    two_form_gram,
    two_form_spectrum,
    weyl_operator_norm,
)


def _random_sym(rng, m, batch=()):
    a = rng.normal(size=batch + (m, m))
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def _random_spd(rng, m, batch=()):
    a = rng.normal(size=batch + (m, m))
    return a @ np.swapaxes(a, -1, -2) + m * np.eye(m)


def _count_below(a, b, sigma):
    """Eigenvalues of (a, b) below sigma = negative pivots of a - sigma b (Sylvester)."""
    m = a - sigma * b
    n = len(m)
    m = m.copy()
    neg = 0
    for k in range(n):
        piv = m[k, k]
        neg += piv < 0
        m[k + 1 :, k + 1 :] -= np.outer(m[k + 1 :, k], m[k, k + 1 :]) / piv
    return neg


def test_jacobi_on_diagonal_input():
    w, v = jacobi_eigh(np.diag([3.0, -1.0, 2.0]))
    np.testing.assert_array_equal(w, [-1.0, 2.0, 3.0])
    np.testing.assert_array_equal(np.abs(v), np.eye(3)[:, [1, 2, 0]])


def test_jacobi_two_by_two_closed_form():
    a, b, c = 2.0, 0.7, -1.3
    w, _ = jacobi_eigh(np.array([[a, b], [b, c]]))
    mid, rad = 0.5 * (a + c), math.hypot(0.5 * (a - c), b)
    np.testing.assert_allclose(w, [mid - rad, mid + rad], rtol=1e-15, atol=1e-15)


def test_jacobi_matches_lapack_on_a_batch():
    rng = np.random.default_rng(0)
    a = _random_sym(rng, 6, (500,))
    w, _ = jacobi_eigh(a)
    ref = np.linalg.eigvalsh(a)
    assert np.max(np.abs(w - ref)) < 1e-11


def test_jacobi_reports_nonconvergence():
    rng = np.random.default_rng(1)
    with pytest.raises(JacobiConvergenceError):
        jacobi_eigh(_random_sym(rng, 5), max_sweeps=1)


def test_jacobi_handles_tiny_off_diagonal():
    a = np.array([[1.0, 1e-300], [1e-300, 2.0]])
    w, _ = jacobi_eigh(a)
    np.testing.assert_allclose(w, [1.0, 2.0])


@given(seed=st.integers(0, 2**32 - 1), m=st.integers(1, 7))
def test_jacobi_decomposition_properties(seed, m):
    rng = np.random.default_rng(seed)
    a = _random_sym(rng, m)
    w, v = jacobi_eigh(a)
    assert np.all(np.diff(w) >= 0)
    np.testing.assert_allclose(v.T @ v, np.eye(m), atol=1e-12)
    np.testing.assert_allclose(v @ np.diag(w) @ v.T, a, atol=1e-11 * max(1, np.abs(a).max()))


@given(seed=st.integers(0, 2**32 - 1), m=st.integers(2, 6))
def test_generalized_eigenvalues_against_inertia_count(seed, m):
    rng = np.random.default_rng(seed)
    a, b = _random_sym(rng, m), _random_spd(rng, m)
    lam, x = sym_eigensolve(a, b, vectors=True)
    np.testing.assert_allclose(x.T @ b @ x, np.eye(m), atol=1e-10)
    np.testing.assert_allclose(a @ x, b @ x * lam, atol=1e-9)
    gaps = np.diff(lam)
    for i in range(m - 1):
        if gaps[i] > 1e-6:
            sigma = 0.5 * (lam[i] + lam[i + 1])
            assert _count_below(a, b, sigma) == i + 1


def test_generalized_eigenvalues_match_scipy():
    rng = np.random.default_rng(5)
    a, b = _random_sym(rng, 6, (50,)), _random_spd(rng, 6, (50,))
    lam = sym_eigensolve(a, b)
    ref = np.array([scipy.linalg.eigh(a[i], b[i], eigvals_only=True) for i in range(50)])
    assert np.max(np.abs(lam - ref)) < 1e-10


def test_singular_gram_rejected():
    b = np.diag([1.0, 0.0, 2.0])
    with pytest.raises(NotPositiveDefiniteError):
        sym_eigensolve(np.eye(3), b)


def test_space_form_tensor_has_single_eigenvalue():
    # T_abcd = c (g_ac g_bd - g_ad g_bc) acts as 2c on 2-forms
    grid = GridSpec.uniform(4, 8)
    ms = metric_state(random_smooth_perturbation(grid, {"eps": 0.2}, 3), grid)
    g, c = ms.g, -0.75
    t = c * (np.einsum("ac...,bd...->abcd...", g, g) - np.einsum("ad...,bc...->abcd...", g, g))
    spec = two_form_spectrum(t, ms)
    np.testing.assert_allclose(spec.eigenvalues, 2 * c, atol=1e-11)


def test_two_form_gram_flat_is_twice_identity():
    grid = GridSpec.uniform(3, 8)
    gram = two_form_gram(flat_torus(grid, {}, 0), 3)
    np.testing.assert_array_equal(gram[..., 0, 0, 0], 2 * np.eye(3))


@pytest.mark.parametrize("n,expected", [(4, Fraction(1, 5)), (5, Fraction(1, 10)), (6, Fraction(1, 14)), (7, Fraction(1, 20))])
def test_delta_n_table(n, expected):
    assert delta_n(n) == expected


def test_delta_n_undefined_below_four():
    with pytest.raises(ValueError):
        delta_n(3)


def test_flat_bounds_are_zero():
    grid = GridSpec.uniform(3, 8)
    ms = metric_state(anisotropic_constant(grid, {"a": [1.0, 2.0, 0.5]}, 0), grid)
    cb = curvature_bundle(ms)
    assert theorem1_margin(cb, ms) == 0.0
    assert curvature_operator_bound(cb, ms) == pytest.approx(0.0, abs=1e-14)
    assert ricci_min_eigenvalue(cb, ms) == pytest.approx(0.0, abs=1e-14)


def test_huisken_not_applicable_without_positive_scalar_curvature():
    grid = GridSpec.uniform(4, 8)
    ms = metric_state(conformal_perturbation(grid, {"eps": 0.1}, 0), grid)
    hp = huisken_pinch(curvature_bundle(ms), ms)
    assert not hp.applicable and math.isnan(hp.ratio_max)
    assert hp.delta_n == Fraction(1, 5)


def test_margin_field_bounds_global_margin():
    grid = GridSpec.uniform(3, 12)
    ms = metric_state(random_smooth_perturbation(grid, {"eps": 0.2}, 1), grid)
    cb = curvature_bundle(ms)
    # every global term is the worst node value, so the global margin is the smallest
    assert theorem1_margin(cb, ms) <= float(theorem1_margin_field(cb, ms).min()) + 1e-12


def test_curvature_operator_bound_is_half_min_eigenvalue():
    grid = GridSpec.uniform(3, 12)
    ms = metric_state(random_smooth_perturbation(grid, {"eps": 0.2}, 1), grid)
    cb = curvature_bundle(ms)
    assert curvature_operator_bound(cb, ms) == 0.5 * curvature_operator_spectrum(cb, ms).min


def test_pinch_report_nan_in_two_dimensions():
    grid = GridSpec.uniform(2, 8)
    ms = metric_state(conformal_perturbation(grid, {"eps": 0.1}, 0), grid)
    rep = pinch_report(curvature_bundle(ms), ms, 0.0)
    assert math.isnan(rep.W_val) and math.isnan(rep.theorem1_margin) and math.isnan(rep.huisken_ratio_max)
    assert math.isfinite(rep.L_val) and math.isfinite(rep.k_bound)


def test_weyl_norm_three_dimensions_vanishes():
    grid = GridSpec.uniform(3, 12)
    ms = metric_state(random_smooth_perturbation(grid, {"eps": 0.2}, 2), grid)
    assert weyl_operator_norm(curvature_bundle(ms), ms) < 1e-10
