import numpy as np
import pytest

from src.forward import (BoundaryTrace, CoefficientPair, CompatibilityError, apply_operator, cn_defect,
                         dn_difference_on_G, dn_output, normal_derivative, reverse_time, solve_ibvp)
from src.grid import AdmissibilityError, BoundaryRegion, ScalarField, SpaceTimeGrid, VectorField
from src.presets import build_vector_field, constant_scalar


@pytest.fixture
def grid():
    return SpaceTimeGrid(2, 9, 8, 1.0)


def _constant_drift(grid, fraction=0.5):
    a = fraction * grid.admissible_bound
    A = VectorField.from_arrays(grid, [np.full(grid.shape, a), np.zeros(grid.shape)], time_independent=True)
    return A, a


def test_coefficient_pair_derived_potentials(grid):
    A, a = _constant_drift(grid)
    q = constant_scalar(grid, 2.0)
    c = CoefficientPair(A, q)
    np.testing.assert_allclose(c.div_A.values, 0.0, atol=1e-14)
    np.testing.assert_allclose(c.q_tilde.values, 2.0 - a**2)
    np.testing.assert_allclose(c.q_tilde_star.values, 2.0 - a**2)
    np.testing.assert_allclose(c.recompute_q_tilde().values, c.q_tilde.values)
    assert c.is_time_independent()


def test_coefficient_pair_rejects_inadmissible_field(grid):
    A = VectorField.from_arrays(grid, [np.full(grid.shape, 1.0), np.zeros(grid.shape)])
    with pytest.raises(AdmissibilityError):
        CoefficientPair(A, ScalarField.zeros(grid))


def test_coefficient_pair_rejects_mixed_grids(grid):
    other = SpaceTimeGrid(2, 10, 8, 1.0)
    with pytest.raises(ValueError):
        CoefficientPair(VectorField.zeros(grid), ScalarField.zeros(other))


def test_zero_data_gives_zero_solution(grid):
    c = CoefficientPair(build_vector_field(grid, "swirl"), constant_scalar(grid, 1.0))
    u = solve_ibvp(c, BoundaryTrace.zeros(grid))
    assert u.sup_norm() == 0.0


def test_forward_requires_data_vanishing_at_start(grid):
    f = BoundaryTrace.from_function(grid, lambda t, x1, x2: 1.0 + 0.0 * t)
    with pytest.raises(CompatibilityError):
        solve_ibvp(CoefficientPair.zero(grid), f)


def test_adjoint_requires_data_vanishing_at_end(grid):
    f = BoundaryTrace.from_function(grid, lambda t, x1, x2: t * x1)
    with pytest.raises(CompatibilityError):
        solve_ibvp(CoefficientPair.zero(grid), f, direction="adjoint")


def test_unknown_direction_is_rejected(grid):
    with pytest.raises(ValueError):
        solve_ibvp(CoefficientPair.zero(grid), BoundaryTrace.zeros(grid), direction="backward")


def test_forward_reproduces_linear_solution(grid):
    # u = t x1 solves d_t u = Lap u + 2A.grad u + (|A|^2 - q) u + s with q = a^2, s = x1 - 2at
    A, a = _constant_drift(grid)
    c = CoefficientPair(A, constant_scalar(grid, a**2))
    exact = ScalarField.from_function(grid, lambda t, x1, x2: t * x1)
    source = ScalarField.from_function(grid, lambda t, x1, x2: x1 - 2.0 * a * t + 0.0 * x2)
    u = solve_ibvp(c, BoundaryTrace.from_field(exact), source=source)
    np.testing.assert_allclose(u.values, exact.values, atol=1e-10)
    np.testing.assert_allclose(apply_operator(c, u).values, source.values, atol=1e-8)


def test_adjoint_reproduces_linear_solution(grid):
    T = grid.T
    exact = ScalarField.from_function(grid, lambda t, x1, x2: (T - t) * x1)
    source = ScalarField.from_function(grid, lambda t, x1, x2: x1 + 0.0 * t * x2)
    c = CoefficientPair.zero(grid)
    v = solve_ibvp(c, BoundaryTrace.from_field(exact), source=source, direction="adjoint")
    np.testing.assert_allclose(v.values, exact.values, atol=1e-10)
    np.testing.assert_allclose(apply_operator(c, v, adjoint=True).values, source.values, atol=1e-8)


def test_cn_defect_vanishes_on_exact_heat_solution(grid):
    exact = ScalarField.from_function(grid, lambda t, x1, x2: x1 * x2 + 0.0 * t)
    assert np.max(np.abs(cn_defect(grid, exact.values))) < 1e-10


def test_normal_derivative_of_linear_field(grid):
    u = ScalarField.from_function(grid, lambda t, x1, x2: t * x1 + 0.0 * x2)
    trace = normal_derivative(u)
    faces = trace.faces
    t = grid.times[:, None]
    expected = t * faces.normals[None, :, 0]
    np.testing.assert_allclose(trace.values, np.broadcast_to(expected, trace.values.shape), atol=1e-12)


def test_dn_output_adds_convection_term(grid):
    A, a = _constant_drift(grid)
    c = CoefficientPair(A, ScalarField.zeros(grid))
    u = ScalarField.from_function(grid, lambda t, x1, x2: t + 0.0 * x1 * x2)
    out = dn_output(c, u)
    faces = out.faces
    expected = 2.0 * a * faces.normals[None, :, 0] * grid.times[:, None]
    np.testing.assert_allclose(out.values, expected, atol=1e-12)


def test_dn_difference_of_identical_pairs_is_zero(grid):
    c = CoefficientPair(build_vector_field(grid, "swirl"), ScalarField.zeros(grid))
    f = BoundaryTrace.from_function(grid, lambda t, x1, x2: t**2 * (1.0 + x1))
    G = BoundaryRegion.resolve(grid, "G", (1.0, 0.0), epsilon=0.1)
    diff = dn_difference_on_G(c, c, f, G)
    assert diff.sup_norm() == 0.0
    assert diff.tag == "G"


def test_trace_restriction_zeroes_outside_region(grid):
    f = BoundaryTrace.from_function(grid, lambda t, x1, x2: 1.0 + 0.0 * t * x1)
    region = BoundaryRegion.resolve(grid, "illuminated", (1.0, 0.0))
    restricted = f.restrict(region)
    assert np.all(restricted.values[:, ~region.mask] == 0.0)
    assert np.all(restricted.values[:, region.mask] == 1.0)
    assert len(restricted.to_rows()) == (grid.M + 1) * int(region.mask.sum())
    assert restricted.l2_norm() < f.l2_norm()


def test_trace_scatter_round_trip(grid):
    u = ScalarField.from_function(grid, lambda t, x1, x2: t * (x1 + 2 * x2))
    trace = BoundaryTrace.from_field(u)
    nodes = trace.to_nodes()
    boundary = ~grid.interior_mask
    np.testing.assert_allclose(nodes[:, boundary], u.values[:, boundary])
    assert np.all(nodes[:, grid.interior_mask] == 0.0)


def test_reverse_time_flips_first_axis():
    values = np.arange(6).reshape(3, 2)
    np.testing.assert_array_equal(reverse_time(values), values[::-1])
