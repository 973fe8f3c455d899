import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ricciforms.grid import (
    GridError,
    GridSpec,
    einsum_grid,
    hessian,
    integrate_scalar,
    partial_derivative,
    sample,
    second_partial,
)


def _sine_error(n):
    grid = GridSpec.uniform(2, n)
    f = sample(lambda x, y: np.sin(2 * np.pi * x) * np.cos(4 * np.pi * y), grid)
    exact = sample(lambda x, y: 2 * np.pi * np.cos(2 * np.pi * x) * np.cos(4 * np.pi * y), grid)
    return np.max(np.abs(partial_derivative(f, 0, grid) - exact))


def test_first_derivative_is_fourth_order():
    e16, e32 = _sine_error(16), _sine_error(32)
    assert 14 < e16 / e32 < 17


def test_derivative_of_constant_vanishes():
    grid = GridSpec.uniform(3, 8)
    assert np.all(partial_derivative(np.full(grid.shape, 3.5), 2, grid) == 0)


def test_derivative_acts_on_trailing_axes():
    grid = GridSpec((8, 12), (1.0, 2.0))
    f = sample(lambda x, y: np.sin(np.pi * y), grid)
    stacked = np.stack([f, 2 * f])
    d = partial_derivative(stacked, 1, grid)
    np.testing.assert_allclose(d[1], 2 * partial_derivative(f, 1, grid), rtol=0, atol=1e-14)


def test_hessian_symmetric_bitwise():
    grid = GridSpec.uniform(3, 8)
    f = sample(lambda x, y, z: np.exp(np.sin(2 * np.pi * x) * np.cos(2 * np.pi * (y + z))), grid)
    h = hessian(f, grid)
    assert np.array_equal(h, np.swapaxes(h, 0, 1))
    assert np.array_equal(second_partial(f, 2, 0, grid), h[0, 2])


def test_integral_of_trig_polynomial_is_exact():
    grid = GridSpec((16, 8), (2.0, 3.0))
    f = sample(lambda x, y: 1 + np.cos(np.pi * x) ** 2 * np.sin(2 * np.pi * y / 3), grid)
    # mean of the oscillating part vanishes on the nodes
    assert integrate_scalar(f, None, grid) == pytest.approx(6.0, abs=1e-13)


def test_integral_weight_shape_checked():
    grid = GridSpec.uniform(2, 8)
    with pytest.raises(GridError):
        integrate_scalar(np.ones(grid.shape), np.ones((8, 9)), grid)


@pytest.mark.parametrize("points", [(7, 8), (8,), (8, 8, 8, 8, 8)])
def test_grid_rejects_bad_shapes(points):
    with pytest.raises(GridError):
        GridSpec(points, (1.0,) * len(points))


def test_grid_rejects_bad_period():
    with pytest.raises(GridError):
        GridSpec((8, 8), (1.0, 0.0))


def test_einsum_grid_matches_plain_einsum():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(3, 3, 5, 6))
    b = rng.normal(size=(3, 5, 6))
    ref = np.einsum("ij...,j...->i...", a, b)
    np.testing.assert_allclose(einsum_grid("ij...,j...->i...", a[:, :, :, :], b), ref, atol=1e-13)
    # strided operand
    at = np.swapaxes(a, 0, 1)
    np.testing.assert_allclose(einsum_grid("ji...,j...->i...", at, b), ref, atol=1e-13)


def test_einsum_grid_shape_mismatch():
    with pytest.raises(ValueError):
        einsum_grid("i...,i...->...", np.ones((2, 4, 4)), np.ones((2, 4, 5)))


@given(
    shift=st.integers(0, 15),
    c=st.floats(-3, 3, allow_nan=False),
    seed=st.integers(0, 2**16),
)
def test_derivative_linear_and_shift_equivariant(shift, c, seed):
    grid = GridSpec.uniform(2, 16)
    rng = np.random.default_rng(seed)
    f, g = rng.normal(size=grid.shape), rng.normal(size=grid.shape)
    lhs = partial_derivative(f + c * g, 0, grid)
    rhs = partial_derivative(f, 0, grid) + c * partial_derivative(g, 0, grid)
    np.testing.assert_allclose(lhs, rhs, atol=1e-10 * (1 + abs(c)))
    shifted = partial_derivative(np.roll(f, shift, axis=0), 0, grid)
    np.testing.assert_allclose(shifted, np.roll(partial_derivative(f, 0, grid), shift, axis=0), atol=1e-11)


@given(seed=st.integers(0, 2**16))
def test_derivative_integrates_to_zero(seed):
    grid = GridSpec((12, 10), (1.0, 2.5))
    f = np.random.default_rng(seed).normal(size=grid.shape)
    assert abs(integrate_scalar(partial_derivative(f, 1, grid), None, grid)) < 1e-11 * math.sqrt(grid.size)
