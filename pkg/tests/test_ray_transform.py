import warnings

import numpy as np
import pytest

from src.grid import SpaceTimeGrid, VectorField
from src.presets import build_vector_field
from src.ray_transform import (DirectionCone, RayData, attenuated_moment, cone_half_angle, plane_frame,
                               plane_offsets, recover_ray_data, sample_cone, transform)
from src.utils import DEFAULT_TOLERANCES


@pytest.fixture
def grid():
    return SpaceTimeGrid(2, 9, 8, 1.0)


@pytest.mark.parametrize("omega", [(1.0, 0.0), (1.0, 2.0), (0.0, 0.0, 1.0), (1.0, -1.0, 0.5)])
def test_plane_frame_is_orthonormal_complement(omega):
    frame = plane_frame(omega)
    w = np.asarray(omega) / np.linalg.norm(omega)
    assert frame.shape == (len(omega) - 1, len(omega))
    np.testing.assert_allclose(frame @ frame.T, np.eye(len(omega) - 1), atol=1e-12)
    np.testing.assert_allclose(frame @ w, 0.0, atol=1e-12)


def test_cone_half_angle_stays_inside_chordal_radius():
    alpha = cone_half_angle(0.2)
    assert 2.0 * np.sin(alpha / 2.0) <= 0.2


@pytest.mark.parametrize("omega0, count", [((1.0, 0.0), 7), ((1.0, 1.0, 0.0), 12)])
def test_sample_cone(omega0, count):
    cone = sample_cone(omega0, 0.2, count)
    w0 = np.asarray(omega0) / np.linalg.norm(omega0)
    assert cone.count == count
    assert cone.dim == len(omega0)
    np.testing.assert_allclose(cone.directions[0], w0)
    np.testing.assert_allclose(np.linalg.norm(cone.directions, axis=1), 1.0)
    assert np.all(np.linalg.norm(cone.directions - w0, axis=1) <= 0.2)
    assert len(cone.direction_table()) == count


def test_sample_cone_is_deterministic():
    a = sample_cone((1.0, 1.0, 0.0), 0.3, 9)
    b = sample_cone((1.0, 1.0, 0.0), 0.3, 9)
    np.testing.assert_array_equal(a.directions, b.directions)


@pytest.mark.parametrize("epsilon, count", [(0.0, 3), (0.5, 3), (0.2, 0), (0.2, 2.5)])
def test_sample_cone_rejects_bad_arguments(epsilon, count):
    with pytest.raises(ValueError):
        sample_cone((1.0, 0.0), epsilon, count)


def test_direction_cone_rejects_directions_outside_cap():
    with pytest.raises(ValueError):
        DirectionCone((1.0, 0.0), 0.1, np.array([[0.0, 1.0]]))
    with pytest.raises(ValueError):
        DirectionCone((1.0, 0.0), 0.1, np.array([[2.0, 0.0]]))


def test_transform_of_constant_field(grid):
    c = 0.01
    F = VectorField.from_arrays(grid, [np.full(grid.shape, c), np.zeros(grid.shape)], time_independent=True)
    data = transform(F, sample_cone((1.0, 0.0), 0.1, 1))
    assert data.values.shape == (grid.M + 1, 1, grid.N)
    inside = np.abs(plane_offsets(2, grid.N)) <= 0.5
    np.testing.assert_allclose(data.values[0, 0, inside], c)
    np.testing.assert_allclose(data.values[0, 0, ~inside], 0.0)
    np.testing.assert_array_equal(data.values[0], data.values[-1])


def test_transform_annihilates_gradients(grid):
    F = build_vector_field(grid, "gauge-bump")
    data = transform(F, sample_cone((1.0, 0.0), 0.1, 1))
    assert np.max(np.abs(data.values)) < 1e-10


def test_transform_of_gradient_off_axis_is_second_order_small():
    fine = SpaceTimeGrid(2, 33, 8, 1.0)
    F = build_vector_field(fine, "gauge-bump")
    data = transform(F, sample_cone((1.0, 0.0), 0.2, 16))
    per_direction = np.max(np.abs(data.values), axis=(0, 2))
    assert per_direction[0] < 1e-10
    assert np.max(per_direction[1:]) > 1e-8
    assert np.max(per_direction) <= DEFAULT_TOLERANCES.gradient_annihilation_factor * fine.h**2 * F.sup_norm()


def test_transform_is_linear(grid):
    cone = sample_cone((1.0, 1.0), 0.2, 5)
    F = build_vector_field(grid, "swirl")
    G = build_vector_field(grid, "pulse")
    combined = transform(F * 2.0 + G * -0.5, cone).values
    separate = 2.0 * transform(F, cone).values - 0.5 * transform(G, cone).values
    np.testing.assert_allclose(combined, separate, atol=1e-14)


def test_transform_rejects_dimension_mismatch(grid):
    with pytest.raises(ValueError):
        transform(VectorField.zeros(grid), sample_cone((1.0, 0.0, 0.0), 0.1, 1))


def test_attenuation_round_trip(grid):
    A = build_vector_field(grid, "swirl")
    cone = sample_cone((1.0, 0.0), 0.2, 4)
    moment = attenuated_moment(A, cone)
    assert not np.any(moment.flags)
    np.testing.assert_allclose(recover_ray_data(moment).values, transform(A, cone).values, atol=1e-12)


def test_recover_rejects_flagged_rays(grid):
    cone = sample_cone((1.0, 0.0), 0.1, 1)
    data = transform(VectorField.zeros(grid), cone)
    flags = np.zeros(data.values.shape, dtype=bool)
    flags[0, 0, 0] = True
    flagged = RayData(data.cone, data.offsets, data.frames, data.times, data.values, flags)
    with pytest.raises(ValueError, match="flagged"):
        recover_ray_data(flagged)


def test_ray_data_rows_and_base_points(grid):
    cone = sample_cone((1.0, 0.0), 0.1, 2)
    data = transform(VectorField.zeros(grid), cone, plane_resolution=5)
    assert len(data.to_rows()) == (grid.M + 1) * 2 * 5
    assert data.base_points(0).shape == (5, 2)
    assert data.plane_coordinates().shape == (5, 1)


def test_ray_data_rejects_non_finite(grid):
    data = transform(VectorField.zeros(grid), sample_cone((1.0, 0.0), 0.1, 1))
    with pytest.raises(ValueError):
        RayData(data.cone, data.offsets, data.frames, data.times, data.values * np.nan)


def test_attenuated_moment_warns_on_out_of_range_rays(grid, monkeypatch):
    import src.ray_transform as ray_transform

    cone = sample_cone((1.0, 0.0), 0.1, 1)
    base = transform(VectorField.zeros(grid), cone)
    huge = RayData(base.cone, base.offsets, base.frames, base.times, np.full(base.values.shape, -1.0))
    monkeypatch.setattr(ray_transform, "transform", lambda *args, **kwargs: huge)
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        moment = attenuated_moment(VectorField.zeros(grid), cone)
    assert np.all(moment.flags)
    assert any(issubclass(x.category, RuntimeWarning) for x in w)
