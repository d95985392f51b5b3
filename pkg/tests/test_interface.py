import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from segregation.grid import MultiField, make_grid
from segregation.interface import (ComparisonUndefinedError, RadiusBracketError, blowup, classify_singular,
                                   compare_to_profile, definition_violation, extract_interface, find_r_beta,
                                   fit_profile, hausdorff_distance, interface_frequencies,
                                   local_separation_components, reifenberg_flatness)
from segregation.monotonicity import H, N

from conftest import record_at


def _field(grid, *comps, beta=1.0):
    return MultiField(grid, np.stack(comps), beta=beta)


# --- extraction --------------------------------------------------------------

def test_symmetric_1d_interface_is_the_midpoint(sym1d_sweep):
    f = record_at(sym1d_sweep, 2.0**12).field
    iface = classify_singular(f, extract_interface(f))
    assert len(iface) == 1
    assert iface.points[0, 0] == pytest.approx(0.5, abs=1e-3 * f.grid.hmin)
    assert not iface.singular[0]
    assert definition_violation(f, iface) <= 1e-12


def test_linear_pair_gives_vertical_line():
    g = make_grid(2, [(0, 1), (0, 1)], 33)
    X, _ = g.mesh()
    f = _field(g, X, 1 - X)
    iface = extract_interface(f)
    assert len(iface) == 33
    np.testing.assert_allclose(iface.points[:, 0], 0.5, atol=1e-14)
    assert np.all(iface.pairs == [0, 1])
    assert len(iface.segments) == 32


def test_off_lattice_line_is_interpolated_exactly():
    g = make_grid(2, [(0, 1), (0, 1)], 33)
    X, Y = g.mesh()
    f = _field(g, X + 0.3 * Y, 0.55 + 0 * X)
    iface = extract_interface(f)
    np.testing.assert_allclose(iface.points[:, 0] + 0.3 * iface.points[:, 1], 0.55, atol=1e-13)


def test_constant_components_have_empty_interface():
    g = make_grid(2, [(0, 1), (0, 1)], 17)
    f = _field(g, np.full(g.shape, 2.0), np.full(g.shape, 1.0))
    iface = extract_interface(f)
    assert len(iface) == 0
    assert definition_violation(f, iface) == 0.0


def test_dominated_crossing_is_not_interface():
    # u1 and u2 cross at x=0.5 but u3 dominates both there
    g = make_grid(1, [(0, 1)], 101)
    x = g.axes[0]
    f = _field(g, x, 1 - x, np.full(g.shape, 2.0))
    iface = extract_interface(f)
    assert not np.any((iface.pairs == [0, 1]).all(axis=1))


def test_cross_center_is_singular_and_crossing_regular(cross_sweep):
    f = cross_sweep[-1].field
    iface = classify_singular(f, extract_interface(f))
    centre = iface.nearest([0.0, 0.0])
    assert np.linalg.norm(iface.points[centre]) < 2 * f.grid.hmin
    assert iface.singular[centre]
    far = iface.nearest([0.0, 0.6])
    assert not iface.singular[far]
    assert definition_violation(f, iface) <= 1e-10


def test_interface_frequencies_attach_N(tilted_sweep):
    f = tilted_sweep[-1].field
    iface = interface_frequencies(f, extract_interface(f).subset(np.arange(5)), 0.05)
    assert iface.frequency.shape == (5,)
    finite = np.isfinite(iface.frequency)
    for p, v in zip(iface.points[finite], iface.frequency[finite]):
        assert v == pytest.approx(N(f, p, 0.05))


def test_interface_csv_columns(tmp_path, tilted_sweep):
    f = tilted_sweep[-1].field
    p = extract_interface(f).to_csv(tmp_path / "i.csv")
    assert p.read_text().splitlines()[0] == "x,y,i1,i2,singular,grad_norm"


# --- r_beta and blow-up -----------------------------------------------------

@pytest.mark.parametrize("beta", [25.0, 50.0, 100.0])
def test_r_beta_closed_form_for_constant(beta):
    g = make_grid(2, [(-0.5, 0.5), (-0.5, 0.5)], 129)
    f = _field(g, np.ones(g.shape), np.zeros(g.shape), beta=beta)
    assert find_r_beta(f, [0.0, 0.0]) == pytest.approx((2 * math.pi * beta) ** -0.5, rel=1e-5)


def test_r_beta_bracket_errors():
    g = make_grid(2, [(-0.5, 0.5), (-0.5, 0.5)], 33)
    f = _field(g, np.ones(g.shape), np.zeros(g.shape), beta=0.1)
    with pytest.raises(RadiusBracketError) as e:
        find_r_beta(f, [0.0, 0.0])
    assert e.value.side == "above"
    f = _field(g, np.ones(g.shape), np.zeros(g.shape), beta=1e6)
    with pytest.raises(RadiusBracketError) as e:
        find_r_beta(f, [0.0, 0.0])
    assert e.value.side == "below"


def test_r_beta_decreases_along_sweep(sym1d_sweep):
    r = np.array([rec.r_beta for rec in sym1d_sweep if rec.beta >= 2.0**8])
    assert np.all(np.isfinite(r))
    assert np.all(np.diff(r) < 0)


def test_blowup_normalisation_and_frequency_transport(sym1d_sweep):
    rec = record_at(sym1d_sweep, 2.0**14)
    f = rec.field
    bp = blowup(f, rec.point, rec.r_beta, 3.0)
    assert bp.field.beta == 1.0
    assert H(bp.field, [0.0], 1.0) == pytest.approx(1.0, abs=1e-3)
    assert N(bp.field, [0.0], 2.0) == pytest.approx(N(f, rec.point, 2 * rec.r_beta), rel=1e-3)
    assert bp.field.grid.n[0] % 2 == 1


def test_blowup_window_must_fit():
    g = make_grid(1, [(0, 1)], 101)
    f = _field(g, g.axes[0], 1 - g.axes[0], beta=10.0)
    with pytest.raises(ValueError):
        blowup(f, [0.5], 0.2, 3.0)


def test_profile_compares_to_itself(profile):
    g = make_grid(1, [(-6, 6)], 1201)
    w1, w2 = profile(g.axes[0])
    f = _field(g, w1, w2)
    r = find_r_beta(f, [0.0])
    bp = blowup(f, [0.0], r, 2.0)
    fit = fit_profile(bp, profile)
    assert fit.distance <= 1e-4
    # with beta = 1, H(r) r^2 = 1 makes the blow-up exactly the copy of scale r
    assert fit.scale == pytest.approx(r, rel=1e-3)


def test_one_dimensional_blowup_matches_profile(sym1d_sweep, profile):
    for beta in (2.0**10, 2.0**14, 2.0**18):
        rec = record_at(sym1d_sweep, beta)
        assert rec.profile_distance <= 1e-4


def test_comparison_undefined_at_cross(cross_sweep, profile):
    rec = cross_sweep[-1]
    f = rec.field
    bp = blowup(f, [0.0, 0.0], 0.1, 2.0)
    with pytest.raises(ComparisonUndefinedError):
        compare_to_profile(bp, profile)


# --- Hausdorff and flatness ---------------------------------------------------

def test_hausdorff_unit_cases():
    assert hausdorff_distance([[0.0]], [[0.0]]) == 0.0
    assert hausdorff_distance([[0.0]], [[1.0]]) == 1.0
    assert hausdorff_distance([[0.0], [2.0]], [[1.0]]) == 1.0
    with pytest.raises(ValueError):
        hausdorff_distance(np.empty((0, 2)), [[0.0, 0.0]])


point_sets = st.lists(st.tuples(st.floats(-10, 10), st.floats(-10, 10)), min_size=1, max_size=12)


@given(point_sets, point_sets, point_sets)
def test_hausdorff_is_a_metric(a, b, c):
    dab, dba = hausdorff_distance(a, b), hausdorff_distance(b, a)
    assert dab == dba and dab >= 0
    assert hausdorff_distance(a, a) == 0
    assert hausdorff_distance(a, c) <= dab + hausdorff_distance(b, c) + 1e-9


def test_straight_line_is_flat():
    s = np.linspace(-1, 1, 2001)
    pts = np.column_stack([s, 0.3 * s])
    rep = reifenberg_flatness(pts, [0.0, 0.0], [0.5, 1.0], spacing=1e-3)
    # only the sampling gap (~1e-3 absolute) separates the sampled line from the set
    assert np.all(rep.delta * rep.radii <= 1.5e-3)
    # the recorded normal is perpendicular to the line direction
    assert abs(math.cos(rep.normal_angles[0]) + 0.3 * math.sin(rep.normal_angles[0])) <= 1e-2


def test_corner_flatness():
    s = np.linspace(0, 1, 2001)
    pts = np.vstack([np.column_stack([s, 0 * s]), np.column_stack([0 * s, s])])
    d = reifenberg_flatness(pts, [0.0, 0.0], [1.0], spacing=5e-4).delta[0]
    assert d == pytest.approx(1 / math.sqrt(2), abs=1e-3)


@given(st.floats(0, 2 * math.pi), st.floats(-3, 3), st.floats(-3, 3))
def test_flatness_rigid_motion_invariance(theta, tx, ty):
    s = np.linspace(0, 1, 801)
    pts = np.vstack([np.column_stack([s, 0 * s]), np.column_stack([-s, 0.5 * s])])
    R = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    t = np.array([tx, ty])
    d0 = reifenberg_flatness(pts, [0.0, 0.0], [0.8], spacing=1e-3).delta[0]
    d1 = reifenberg_flatness(pts @ R.T + t, t, [0.8], spacing=1e-3).delta[0]
    assert d1 == pytest.approx(d0, abs=5e-3)


def test_one_dimensional_flatness_is_zero():
    rep = reifenberg_flatness(np.array([[0.5]]), [0.5], [0.1, 0.2])
    assert np.all(rep.delta == 0)


def test_flatness_needs_points_in_ball():
    with pytest.raises(ValueError):
        reifenberg_flatness(np.array([[5.0, 5.0]]), [0.0, 0.0], [1.0], spacing=0.1)


# --- local separation --------------------------------------------------------

def test_separation_components_linear_and_cross():
    g = make_grid(2, [(-1, 1), (-1, 1)], 65)
    X, Y = g.mesh()
    f = _field(g, np.maximum(X, 0), np.maximum(-X, 0))
    assert local_separation_components(f, [0.0, 0.0], 0.5, pair=(0, 1)) == 2


def test_separation_on_sweeps(tilted_sweep, sym1d_sweep):
    assert all(r.separation == 2 for r in tilted_sweep if r.converged)
    assert all(r.separation == 2 for r in sym1d_sweep if r.converged)
