import numpy as np
import pytest

from src.grid import SpaceTimeGrid, VectorField
from src.rays import box_intersection, half_line_exponent, ray_integrals, ray_quadrature


@pytest.fixture
def grid():
    return SpaceTimeGrid(2, 17, 8, 1.0)


def test_box_intersection_full_and_half_line():
    points = np.array([[0.5, 0.5], [2.0, 0.5]])
    s_lo, s_hi = box_intersection(points, np.array([1.0, 0.0]), half_line=False)
    assert s_lo[0] == pytest.approx(-0.5)
    assert s_hi[0] == pytest.approx(0.5)
    assert s_hi[1] <= s_lo[1]

    s_lo, s_hi = box_intersection(points[:1], np.array([1.0, 0.0]), half_line=True)
    assert (s_lo[0], s_hi[0]) == (0.0, pytest.approx(0.5))


def test_box_intersection_parallel_ray_outside_misses():
    s_lo, s_hi = box_intersection(np.array([[2.0, 0.5]]), np.array([0.0, 1.0]), half_line=False)
    assert s_hi[0] <= s_lo[0]


@pytest.mark.parametrize("point, omega, expected", [
    ((0.0, 0.5), (1.0, 0.0), 1.0),
    ((0.5, 0.0), (0.0, 1.0), 1.0),
    ((0.0, 0.0), (1.0, 1.0), np.sqrt(2.0)),
])
def test_ray_integrals_of_constant_give_chord_length(grid, point, omega, expected):
    ones = np.ones(grid.spatial_shape)
    assert ray_integrals(ones, grid, np.array([point]), omega)[0] == pytest.approx(expected)


def test_ray_integrals_exact_for_linear_slice(grid):
    values = grid.coords[0]
    out = ray_integrals(values, grid, np.array([[0.3, 0.3], [0.7, 0.9]]), (1.0, 0.0))
    np.testing.assert_allclose(out, [0.5, 0.5], atol=1e-12)


def test_ray_integrals_missing_rays_are_zero(grid):
    ones = np.ones(grid.spatial_shape)
    out = ray_integrals(ones, grid, np.array([[2.0, 2.0]]), (1.0, 0.0))
    assert out.tolist() == [0.0]


def _unit_x(grid):
    return VectorField.from_arrays(grid, [np.ones(grid.shape), np.zeros(grid.shape)], time_independent=True)


def test_ray_quadrature_half_and_full(grid):
    F = _unit_x(grid)
    assert ray_quadrature(F, 0, (0.25, 0.5), (1.0, 0.0), s_range="half") == pytest.approx(0.75)
    assert ray_quadrature(F, 0, (0.25, 0.5), (1.0, 0.0), s_range="full") == pytest.approx(1.0)
    assert ray_quadrature(F, 0, (0.25, 0.5), (0.0, 1.0), s_range="full") == pytest.approx(0.0)


def test_ray_quadrature_rejects_unknown_range(grid):
    with pytest.raises(ValueError):
        ray_quadrature(_unit_x(grid), 0, (0.5, 0.5), (1.0, 0.0), s_range="both")


def test_half_line_exponent_distance_to_exit_face(grid):
    exponent = half_line_exponent(_unit_x(grid), (1.0, 0.0))
    assert exponent.shape == grid.shape
    expected = 1.0 - grid.coords[0]
    np.testing.assert_allclose(exponent[0], expected, atol=1e-12)
    np.testing.assert_allclose(exponent[-1], expected, atol=1e-12)


def test_half_line_exponent_time_dependent_field(grid):
    profile = grid.broadcast_time(grid.times)
    F = VectorField.from_arrays(grid, [profile * np.ones(grid.shape), np.zeros(grid.shape)])
    exponent = half_line_exponent(F, (1.0, 0.0))
    np.testing.assert_allclose(exponent[:, 0, 0], grid.times, atol=1e-12)
