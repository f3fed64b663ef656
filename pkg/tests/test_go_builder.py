import numpy as np
import pytest

from src.forward import CoefficientPair
from src.go_builder import (CarlemanWeight, build_amplitude, build_go_solution, solve_conjugated_dirichlet,
                            time_cutoff, transport_cancellation_residual)
from src.grid import AdmissibilityError, ScalarField, SpaceTimeGrid, VectorField
from src.presets import build_vector_field


@pytest.fixture
def grid():
    return SpaceTimeGrid(2, 9, 8, 1.0)


def _constant_drift(grid, fraction=0.5):
    a = fraction * grid.admissible_bound
    return VectorField.from_arrays(grid, [np.full(grid.shape, a), np.zeros(grid.shape)], time_independent=True)


def test_weight_normalizes_direction():
    weight = CarlemanWeight(4, (3.0, 4.0))
    assert weight.lam == 4.0
    np.testing.assert_allclose(weight.direction, [0.6, 0.8])


@pytest.mark.parametrize("lam", [0.0, -1.0])
def test_weight_rejects_nonpositive_lambda(lam):
    with pytest.raises(ValueError):
        CarlemanWeight(lam, (1.0, 0.0))


def test_weight_on_grid(grid):
    weight = CarlemanWeight(2.0, (1.0, 0.0))
    phi = weight.on_grid(grid)
    assert phi.shape == grid.shape
    expected = 4.0 * grid.broadcast_time(grid.times) + 2.0 * grid.coords[0][None]
    np.testing.assert_allclose(phi, expected)


def test_time_cutoff_profile(grid):
    chi = time_cutoff(grid)
    assert chi[grid.M // 2] == pytest.approx(1.0)
    assert chi[0] == chi[-1] == 0.0
    assert np.all(chi[grid.times <= 0.1 * grid.T] == 0.0)
    assert np.all((chi >= 0.0) & (chi <= 1.0))


@pytest.mark.parametrize("kind", ["growing", "decaying"])
def test_amplitude_without_convection_is_cutoff(grid, kind):
    B = build_amplitude(kind, VectorField.zeros(grid), CarlemanWeight(2.0, (1.0, 0.0)))
    chi = np.broadcast_to(grid.broadcast_time(time_cutoff(grid)), grid.shape)
    np.testing.assert_allclose(B.values, chi, atol=1e-14)


def test_growing_amplitude_oscillates_with_unit_modulus(grid):
    xi = (0.0, np.pi)
    B = build_amplitude("growing", VectorField.zeros(grid), CarlemanWeight(2.0, (1.0, 0.0)), tau=np.pi, xi=xi)
    chi = np.broadcast_to(grid.broadcast_time(time_cutoff(grid)), grid.shape)
    np.testing.assert_allclose(np.abs(B.values), chi, atol=1e-14)
    assert B.is_complex


def test_amplitude_rejects_non_orthogonal_frequency(grid):
    with pytest.raises(ValueError, match="not orthogonal"):
        build_amplitude("growing", VectorField.zeros(grid), CarlemanWeight(2.0, (1.0, 0.0)), xi=(1.0, 0.0))


def test_amplitude_rejects_unknown_kind(grid):
    with pytest.raises(ValueError):
        build_amplitude("steady", VectorField.zeros(grid), CarlemanWeight(2.0, (1.0, 0.0)))


def test_amplitude_rejects_inadmissible_field(grid):
    A = VectorField.from_arrays(grid, [np.ones(grid.shape), np.zeros(grid.shape)])
    with pytest.raises(AdmissibilityError):
        build_amplitude("growing", A, CarlemanWeight(2.0, (1.0, 0.0)))


def test_transport_residual_vanishes_without_convection(grid):
    weight = CarlemanWeight(3.0, (1.0, 0.0))
    B = build_amplitude("growing", VectorField.zeros(grid), weight, tau=1.0, xi=(0.0, np.pi))
    assert transport_cancellation_residual(B, VectorField.zeros(grid), weight) == 0.0


@pytest.mark.parametrize("kind", ["growing", "decaying"])
def test_transport_residual_small_for_constant_drift(grid, kind):
    A = _constant_drift(grid)
    weight = CarlemanWeight(3.0, (1.0, 0.0))
    B = build_amplitude(kind, A, weight)
    assert transport_cancellation_residual(B, A, weight, kind=kind) < 1e-4


def test_heat_solution_has_negligible_residual(grid):
    solution = build_go_solution("growing", CoefficientPair.zero(grid), CarlemanWeight(2.0, (1.0, 0.0)))
    assert solution.residual < 1e-8
    assert np.all(solution.remainder.values[0] == 0.0)


def test_decaying_remainder_vanishes_at_final_time(grid):
    c = CoefficientPair(build_vector_field(grid, "swirl"), ScalarField.zeros(grid))
    solution = build_go_solution("decaying", c, CarlemanWeight(2.0, (1.0, 0.0)))
    assert np.all(solution.remainder.values[-1] == 0.0)
    assert solution.tau == 0.0
    assert np.isfinite(solution.residual)


def test_go_solution_assembly_and_metadata(grid):
    weight = CarlemanWeight(2.0, (0.0, 1.0))
    solution = build_go_solution("growing", CoefficientPair.zero(grid), weight, tau=1.0, xi=(np.pi, 0.0))
    v = solution.assemble()
    np.testing.assert_allclose(v.values, np.exp(weight.on_grid(grid)) * solution.unweighted.values)
    meta = solution.to_metadata()
    assert meta["kind"] == "growing"
    assert meta["lambda"] == 2.0
    assert meta["xi"] == [np.pi, 0.0]
    assert solution.remainder_norm() > 0.0


def test_conjugated_dirichlet_with_zero_data(grid):
    boundary = ScalarField.zeros(grid)
    w = solve_conjugated_dirichlet(CoefficientPair.zero(grid), CarlemanWeight(2.0, (1.0, 0.0)), boundary)
    assert w.sup_norm() == 0.0
