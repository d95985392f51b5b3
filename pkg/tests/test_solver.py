import numpy as np
import pytest
from hypothesis import given, strategies as st

from segregation.grid import MultiField, ReactionParams, make_grid
from segregation.solver import (BoundaryData, ConvergenceError, SolverConfig, boundary_mask, continue_in_beta,
                                energy, geometric_schedule, laplacian_interior, residual, solve)


def unit_1d(n=101):
    g = make_grid(1, (0, 1), n)
    return g, BoundaryData.from_functions(g, [lambda x: 1 - x, lambda x: x])


def test_beta_zero_gives_linear_profiles():
    g, bd = unit_1d()
    f = solve(g, 2, 1.0, 0.0, bd)
    x = g.axes[0]
    np.testing.assert_allclose(f.values[0], 1 - x, atol=1e-10)
    np.testing.assert_allclose(f.values[1], x, atol=1e-10)


def test_symmetric_crossing_at_midpoint():
    g, bd = unit_1d(201)
    f = solve(g, 2, 1.0, 1e4, bd)
    mid = 100
    assert f.values[0, mid] == pytest.approx(f.values[1, mid], abs=1e-9)
    assert residual(f) <= 1e-8
    # equivariance: swap + reflect
    np.testing.assert_allclose(f.values[0], f.values[1][::-1], atol=1e-9)


def test_dirichlet_data_kept_and_nonnegative():
    g = make_grid(2, [(0, 1), (0, 1)], 17)
    bd = BoundaryData.from_functions(g, [lambda X, Y: X, lambda X, Y: 1 - X])
    f = solve(g, 2, 1.0, 100.0, bd)
    m = boundary_mask(g)
    np.testing.assert_array_equal(f.values[:, m], bd.traces[:, m])
    assert f.values.min() >= 0


def test_energy_decreases_along_iterations():
    g, bd = unit_1d(201)
    hist = []
    solve(g, 2, 1.0, 1e3, bd, history=hist)
    e = np.array([h[2] for h in hist])
    assert np.all(np.diff(e) <= 1e-12 * np.abs(e[:-1]))


def test_boundary_data_validation():
    g = make_grid(1, (0, 1), 11)
    with pytest.raises(ValueError):
        BoundaryData.from_functions(g, [lambda x: x, lambda x: 0 * x])
    with pytest.raises(ValueError):
        BoundaryData.from_functions(g, [lambda x: x - 1, lambda x: x])


def test_budget_exhaustion_raises_with_last_iterate():
    g, bd = unit_1d(201)
    with pytest.raises(ConvergenceError) as e:
        solve(g, 2, 1.0, 1e5, bd, config=SolverConfig(max_iters=2))
    assert e.value.field is not None and e.value.residual > 1e-8


def test_solver_config_validation():
    for bad in (dict(residual_tol=0), dict(max_iters=0), dict(damping=1.5), dict(scheme="jacobi")):
        with pytest.raises(ValueError):
            SolverConfig(**bad)


def test_continuation_requires_increasing_beta():
    g, bd = unit_1d()
    f = solve(g, 2, 1.0, 10.0, bd)
    with pytest.raises(ValueError):
        continue_in_beta(f, 10.0)
    f2 = continue_in_beta(f, 20.0)
    assert f2.beta == 20.0 and residual(f2) <= 1e-8


def test_reaction_terms():
    g, bd = unit_1d()
    rp = ReactionParams((0.5, 0.5), (1.0, 1.0))
    f = solve(g, 2, 1.0, 50.0, bd, reaction=rp)
    assert residual(f) <= 1e-8
    assert f.reaction is rp


def test_geometric_schedule():
    assert geometric_schedule(1, 16) == [1, 2, 4, 8, 16]
    assert len(geometric_schedule(1, 2.0**16)) == 17
    with pytest.raises(ValueError):
        geometric_schedule(4, 1)


@given(st.integers(5, 30), st.floats(0.1, 3.0))
def test_laplacian_of_quadratic(n, c):
    g = make_grid(2, [(0, 1), (0, 2)], n)
    X, Y = g.mesh()
    lap = laplacian_interior(c * (X**2 + 3 * Y**2), g.h)
    np.testing.assert_allclose(lap, 8 * c, rtol=1e-8)


def test_energy_of_linear_data():
    g, bd = unit_1d(11)
    f = MultiField(g, bd.traces, beta=0.0)
    assert energy(f) == pytest.approx(1.0)  # two components, 1/2 |u'|^2 = 1/2 each
