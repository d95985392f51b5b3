import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from segregation.grid import (GridError, MultiField, ball_integral, coupling_matrix, load_field, make_grid,
                              save_field, sphere_integral)


def test_make_grid_spacing_and_axes():
    g = make_grid(2, [(0, 1), (-1, 1)], (11, 21))
    assert g.h == pytest.approx((0.1, 0.1))
    assert g.shape == (11, 21)
    assert g.axes[1][0] == -1 and g.axes[1][-1] == pytest.approx(1)


@pytest.mark.parametrize("args", [(3, (0, 1), 5), (1, (1, 0), 5), (1, (0, 1), 2), (2, [(0, 1)], 5)])
def test_make_grid_rejects_bad_input(args):
    with pytest.raises(GridError):
        make_grid(*args)


def test_coupling_matrix_scalar_and_full():
    a = coupling_matrix(3, 2.0)
    assert np.all(np.diag(a) == 0) and a[0, 1] == 2.0
    with pytest.raises(ValueError):
        coupling_matrix(2, [[0, 1, 1]])


def test_multifield_validation():
    g = make_grid(1, (0, 1), 5)
    with pytest.raises(ValueError):
        MultiField(g, np.zeros((1, 5)))
    with pytest.raises(ValueError):
        MultiField(g, np.zeros((2, 5)), a=[[0, -1], [-1, 0]])
    with pytest.raises(ValueError):
        MultiField(g, np.zeros((2, 5)), beta=-1)


def test_interpolation_is_exact_for_bilinear_data():
    g = make_grid(2, [(0, 1), (0, 1)], 17)
    X, Y = g.mesh()
    f = MultiField(g, np.stack([X + 2 * Y, X * Y]))
    v = f.interpolate([0.31, 0.77])
    assert v == pytest.approx([0.31 + 1.54, 0.31 * 0.77])
    assert f.interpolate(np.array([[0.1, 0.2], [0.3, 0.4]])).shape == (2, 2)


def test_gradient_of_quadratic_is_exact_inside():
    g = make_grid(2, [(0, 1), (0, 1)], 33)
    X, Y = g.mesh()
    f = MultiField(g, np.stack([X**2, Y]))
    gr = f.gradient([0.5, 0.5])
    assert gr[0] == pytest.approx([1.0, 0.0], abs=1e-12)
    assert gr[1] == pytest.approx([0.0, 1.0], abs=1e-12)


def test_strict_gradient_refuses_boundary_points():
    g = make_grid(2, [(0, 1), (0, 1)], 9)
    f = MultiField(g, np.zeros((2, 9, 9)))
    with pytest.raises(GridError):
        f.gradient([0.0, 0.5])
    assert f.gradient([0.0, 0.5], strict=False).shape == (2, 2)


def test_sphere_and_ball_integrals_of_one():
    g = make_grid(2, [(-1, 1), (-1, 1)], 65)
    one = lambda p: np.ones(len(p))
    assert sphere_integral(one, g, [0, 0], 0.5) == pytest.approx(math.pi)
    assert ball_integral(one, g, [0, 0], 0.5, method="polar") == pytest.approx(math.pi / 4, rel=1e-12)
    assert ball_integral(one, g, [0, 0], 0.5) == pytest.approx(math.pi / 4, rel=1e-2)


def test_1d_quadrature():
    g = make_grid(1, (0, 1), 101)
    sq = lambda p: p[:, 0] ** 2
    assert sphere_integral(sq, g, [0.5], 0.25) == pytest.approx(0.25**2 + 0.75**2)
    exact = (0.75**3 - 0.25**3) / 3
    assert ball_integral(sq, g, [0.5], 0.25) == pytest.approx(exact, rel=1e-4)
    assert ball_integral(sq, g, [0.5], 0.25, method="polar") == pytest.approx(exact, rel=1e-12)


def test_ball_must_fit():
    g = make_grid(2, [(0, 1), (0, 1)], 9)
    with pytest.raises(GridError):
        sphere_integral(lambda p: np.ones(len(p)), g, [0.1, 0.5], 0.2)


def test_save_load_roundtrip(tmp_path, rng):
    g = make_grid(2, [(0, 1), (0, 2)], (5, 7))
    f = MultiField(g, rng.random((3, 5, 7)), beta=12.5, a=coupling_matrix(3, 1.5))
    save_field(f, tmp_path / "f")
    h = load_field(tmp_path / "f")
    assert h.grid == g and h.beta == 12.5
    np.testing.assert_array_equal(h.values, f.values)
    np.testing.assert_array_equal(h.a, f.a)
    assert (tmp_path / "f" / "comp_0.f64").stat().st_size == 5 * 7 * 8


@given(st.floats(0.05, 0.45), st.floats(0.05, 0.45))
def test_polar_ball_integral_of_linear_function(cx, r):
    # the integral of x over B_r(c) equals c * |B_r|
    g = make_grid(2, [(-1, 1), (-1, 1)], 33)
    val = ball_integral(lambda p: p[:, 0], g, [cx, 0.0], r, method="polar")
    assert val == pytest.approx(cx * math.pi * r * r, rel=1e-10, abs=1e-14)
