import numpy as np
import pytest
from hypothesis import given, strategies as st

from ricciforms.curvature import (
    DegenerateMetricError,
    UnsupportedDimensionError,
    algebraic_residuals,
    curvature_bundle,
    identity_residuals,
    kulkarni_nomizu,
    metric_compatibility_residual,
    metric_state,
    riemann_by_differencing,
    streamed_identity_residuals,
    weyl_decompose,
)
from ricciforms.grid import GridSpec, sample
from ricciforms.scenarios import anisotropic_constant, conformal_perturbation, random_smooth_perturbation


def _conformal(grid, u):
    g = np.zeros((grid.dim, grid.dim) + grid.shape)
    for i in range(grid.dim):
        g[i, i] = np.exp(2 * u)
    return g


def _bundle(g, grid, decompose=True):
    ms = metric_state(g, grid)
    return ms, curvature_bundle(ms, decompose)


def test_constant_metric_has_zero_curvature():
    grid = GridSpec((8, 10, 12), (1.0, 2.0, 1.5))
    ms, cb = _bundle(anisotropic_constant(grid, {"a": [1.0, 2.5, 0.3]}, 0), grid)
    assert np.max(np.abs(cb.riemann_mixed)) < 1e-14
    assert np.max(np.abs(cb.scalar)) < 1e-14


def _scalar_error_2d(n):
    grid = GridSpec.uniform(2, n)
    k = 2 * np.pi
    u = sample(lambda x, y: 0.1 * np.sin(k * x) * np.sin(k * y), grid)
    lap_u = -2 * k * k * u
    ms, cb = _bundle(_conformal(grid, u), grid)
    exact = -2 * np.exp(-2 * u) * lap_u
    return np.max(np.abs(cb.scalar - exact)) / np.max(np.abs(exact))


def test_2d_conformal_scalar_curvature_converges_at_fourth_order():
    e16, e32 = _scalar_error_2d(16), _scalar_error_2d(32)
    assert e32 < 1e-3  # relative
    assert e16 / e32 > 12


def test_sectional_curvature_sign_in_2d():
    # R_{0110} = K det g with Gaussian curvature K = R / 2
    grid = GridSpec.uniform(2, 16)
    u = sample(lambda x, y: 0.2 * np.cos(2 * np.pi * x) + 0.1 * np.sin(2 * np.pi * y), grid)
    ms, cb = _bundle(_conformal(grid, u), grid)
    np.testing.assert_allclose(cb.riemann_low[0, 1, 1, 0], 0.5 * cb.scalar * ms.det_g, atol=1e-10)


def _separable(n):
    grid = GridSpec.uniform(3, n)
    x, y, z = grid.coordinates()
    g = np.zeros((3, 3) + grid.shape)
    g[0, 0] = np.broadcast_to(1 + 0.3 * np.sin(2 * np.pi * x), grid.shape)
    g[1, 1] = np.broadcast_to(np.exp(0.2 * np.cos(2 * np.pi * y)), grid.shape)
    g[2, 2] = np.broadcast_to(2 + 0.5 * np.sin(2 * np.pi * z) ** 2, grid.shape)
    return _bundle(g, grid)[1]


def test_orthogonally_separable_metric_is_flat():
    # each g_ii depends on x^i only, so the discrete jets are separable too and
    # the curvature vanishes to round-off rather than to O(h^4)
    for n in (16, 32):
        assert np.max(np.abs(_separable(n).riemann_low)) < 1e-10


def test_riemann_from_jets_matches_differenced_christoffels():
    errs = []
    for n in (16, 32):
        grid = GridSpec.uniform(3, n)
        ms = metric_state(random_smooth_perturbation(grid, {"eps": 0.1}, 2), grid)
        cb = curvature_bundle(ms, decompose=False)
        errs.append(np.max(np.abs(cb.riemann_mixed - riemann_by_differencing(ms))))
    assert errs[1] < 1e-3 and errs[0] / errs[1] > 12


def test_metric_compatibility():
    grid = GridSpec.uniform(3, 12)
    ms = metric_state(random_smooth_perturbation(grid, {"eps": 0.2}, 0), grid)
    assert metric_compatibility_residual(ms) < 1e-12


def test_three_dimensional_weyl_vanishes():
    grid = GridSpec.uniform(3, 16)
    ms, cb = _bundle(random_smooth_perturbation(grid, {"eps": 0.2}, 9), grid)
    assert np.max(np.abs(cb.weyl)) < 1e-8 * max(1.0, np.max(np.abs(cb.rm)))


def test_u_part_norm_matches_scalar_curvature():
    grid = GridSpec.uniform(4, 8)
    ms, cb = _bundle(conformal_perturbation(grid, {"eps": 0.2}, 0), grid)
    np.testing.assert_allclose(cb.decomposition.norm_u, cb.scalar**2 / 6, rtol=1e-10, atol=1e-10)


def test_decomposition_needs_three_dimensions():
    grid = GridSpec.uniform(2, 8)
    ms, cb = _bundle(conformal_perturbation(grid, {"eps": 0.1}, 0), grid)
    assert cb.decomposition is None
    with pytest.raises(UnsupportedDimensionError):
        weyl_decompose(cb, ms)


def test_degenerate_metric_reports_node():
    grid = GridSpec.uniform(2, 8)
    g = conformal_perturbation(grid, {"eps": 0.1}, 0)
    g[1, 1, 3, 5] = -0.5
    with pytest.raises(DegenerateMetricError) as info:
        metric_state(g, grid)
    assert info.value.node == (3, 5)


@given(seed=st.integers(0, 2**16), eps=st.floats(0.0, 0.3), dim=st.sampled_from([3, 4]))
def test_algebraic_identities_hold_to_roundoff(seed, eps, dim):
    grid = GridSpec.uniform(dim, 8)
    g = random_smooth_perturbation(grid, {"eps": eps / dim, "modes": 2}, seed)
    ms, cb = _bundle(g, grid)
    scale = max(1.0, float(np.max(np.abs(cb.riemann_low))))
    res = algebraic_residuals(cb, ms)
    assert set(res) >= {"first_bianchi_low", "pair_symmetry", "decomposition_exact", "orthogonality_rm"}
    assert max(res.values()) < 1e-10 * scale**2


def test_streamed_residuals_equal_dense():
    grid = GridSpec.uniform(3, 12)
    g = random_smooth_perturbation(grid, {"eps": 0.2}, 4)
    ms, cb = _bundle(g, grid)
    dense = identity_residuals(cb, ms, seed=1)
    streamed = streamed_identity_residuals(g, grid, width=5, seed=1)
    assert dense.keys() == streamed.keys()
    for k in dense:
        assert streamed[k] == pytest.approx(dense[k], rel=1e-9, abs=1e-12), k


def test_differential_identities_converge_in_3d():
    res = []
    for n in (16, 32):
        grid = GridSpec.uniform(3, n)
        u = sample(lambda x, y, z: 0.1 * np.sin(2 * np.pi * x) * np.sin(2 * np.pi * y) * np.sin(2 * np.pi * z), grid)
        res.append(streamed_identity_residuals(_conformal(grid, u), grid, algebraic=False))
    for k in res[0]:
        assert res[0][k] / res[1][k] > 12, k


@given(seed=st.integers(0, 2**16), n=st.integers(2, 4))
def test_kulkarni_nomizu_against_loops(seed, n):
    rng = np.random.default_rng(seed)
    h, k = rng.normal(size=(2, n, n, 3))
    got = kulkarni_nomizu(h, k)
    for i, j, a, b in np.ndindex(n, n, n, n):
        want = h[i, a] * k[j, b] + h[j, b] * k[i, a] - h[i, b] * k[j, a] - h[j, a] * k[i, b]
        np.testing.assert_allclose(got[i, j, a, b], want, atol=1e-12)
    # the shortcut taken when both arguments are the same array
    np.testing.assert_allclose(kulkarni_nomizu(h, h), kulkarni_nomizu(h, h.copy()), atol=1e-14)
