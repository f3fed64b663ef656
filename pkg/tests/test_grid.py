import numpy as np
import pytest

from src.grid import (AdmissibilityError, BoundaryRegion, RegionKind, ScalarField, SpaceTimeGrid, VectorField,
                      boundary_faces)


@pytest.fixture
def grid():
    return SpaceTimeGrid(2, 9, 8, 1.0)


@pytest.mark.parametrize(
    "args",
    [
        (1, 9, 8, 1.0),
        (4, 9, 8, 1.0),
        (2, 7, 8, 1.0),
        (2, 9, 7, 1.0),
        (2, 9, 8, 0.0),
    ],
)
def test_grid_rejects_invalid_parameters(args):
    with pytest.raises(ValueError):
        SpaceTimeGrid(*args)


def test_grid_geometry(grid):
    assert grid.h == pytest.approx(1 / 8)
    assert grid.k == pytest.approx(1 / 8)
    assert grid.shape == (9, 9, 9)
    assert grid.radius == pytest.approx(np.sqrt(3.0))
    assert grid.admissible_bound == pytest.approx(1 / (9 * np.sqrt(3.0)))


def test_grid_weights_integrate_constants(grid):
    assert np.sum(grid.spatial_weights) == pytest.approx(1.0)
    assert np.sum(grid.weights) == pytest.approx(grid.T)


def test_scalar_field_is_read_only_and_checks_shape(grid):
    f = ScalarField.zeros(grid)
    with pytest.raises(ValueError):
        f.values[0, 0, 0] = 1.0
    with pytest.raises(ValueError):
        ScalarField(grid, np.zeros((2, 2)))
    with pytest.raises(ValueError):
        ScalarField(grid, np.full(grid.shape, np.nan))


def test_scalar_field_from_function_and_norms(grid):
    f = ScalarField.from_function(grid, lambda t, x, y: 1.0 + 0 * x)
    assert f.sup_norm() == 1.0
    assert f.l2_norm() == pytest.approx(1.0)
    assert f.inner(f) == pytest.approx(1.0)
    assert f.is_time_independent()


def test_scalar_field_arithmetic(grid):
    f = ScalarField.from_function(grid, lambda t, x, y: t + x)
    g = 2.0 * f - f
    np.testing.assert_allclose(g.values, f.values)
    np.testing.assert_allclose((f * 1j).conj().values, -1j * f.values)
    with pytest.raises(ValueError):
        f + ScalarField.zeros(SpaceTimeGrid(2, 11, 8, 1.0))


def test_vector_field_dot_and_norm(grid):
    F = VectorField.from_function(grid, lambda t, x, y: [0 * x + 3.0, 0 * y + 4.0], time_independent=True)
    assert F.sup_norm() == pytest.approx(5.0)
    np.testing.assert_allclose(F.dot([1.0, 0.0]).values, 3.0)
    np.testing.assert_allclose(F.squared_norm().values, 25.0)
    np.testing.assert_allclose((F - F).values, 0.0)


def test_vector_field_time_independent_flag_is_checked(grid):
    with pytest.raises(ValueError):
        VectorField.from_function(grid, lambda t, x, y: [t + 0 * x, 0 * y], time_independent=True)


def test_admissibility_bound(grid):
    bound = grid.admissible_bound
    ok = VectorField.from_arrays(grid, [np.full(grid.shape, bound), np.zeros(grid.shape)])
    ok.check_admissible()
    bad = ok * 1.01
    assert not bad.is_admissible()
    with pytest.raises(AdmissibilityError, match="1/\\(9R\\)"):
        bad.check_admissible()


def test_boundary_faces_cover_every_face(grid):
    faces = boundary_faces(grid)
    assert faces.count == 4 * grid.N
    assert sorted(set(faces.face_ids.tolist())) == [0, 1, 2, 3]
    # each face has length one
    assert np.sum(faces.weights) == pytest.approx(4.0)
    np.testing.assert_allclose(np.linalg.norm(faces.normals, axis=1), 1.0)


def test_boundary_faces_gather(grid):
    faces = boundary_faces(grid)
    f = ScalarField.from_function(grid, lambda t, x, y: x + 10 * y)
    gathered = faces.gather(f.values)
    assert gathered.shape == (grid.M + 1, faces.count)
    np.testing.assert_allclose(gathered[0], faces.coords[:, 0] + 10 * faces.coords[:, 1])


@pytest.mark.parametrize(
    "kind,faces_expected",
    [
        (RegionKind.FULL, [0, 1, 2, 3]),
        (RegionKind.SHADOWED, [1, 2, 3]),
        (RegionKind.ILLUMINATED, [0, 2, 3]),
        (RegionKind.G, [0, 2, 3]),
        (RegionKind.F, [1, 2, 3]),
    ],
)
def test_boundary_region_faces(grid, kind, faces_expected):
    region = BoundaryRegion.resolve(grid, kind, [1.0, 0.0], 0.2)
    assert region.face_ids == faces_expected


def test_complement_of_G_lies_in_sigma_plus(grid):
    eps = 0.2
    G = BoundaryRegion.resolve(grid, "G", [1.0, 0.0], eps)
    for angle in (-0.19, 0.0, 0.19):
        omega = [np.cos(angle), np.sin(angle)]
        plus = BoundaryRegion.resolve(grid, "sigma_plus", [1.0, 0.0], eps, omega=omega)
        assert np.all(plus.mask[~G.mask])


def test_boundary_region_rejects_dimension_mismatch(grid):
    with pytest.raises(ValueError):
        BoundaryRegion.resolve(grid, "G", [1.0, 0.0, 0.0], 0.1)
