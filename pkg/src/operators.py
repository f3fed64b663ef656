"""
Finite-difference stencils and quadrature on `SpaceTimeGrid` nodes.

First derivatives are centered in the interior and one-sided second order
on the box faces; the Laplacian is the 5-point (n=2) or 7-point (n=3)
stencil with one-sided second-order rows on the faces. All three reproduce
polynomials of degree <= 2 exactly.
"""
from __future__ import annotations

import logging
from functools import lru_cache, reduce

import numpy as np
import scipy.sparse as sp
from scipy.integrate import trapezoid

from src.grid import BoundaryFaces, ScalarField, SpaceTimeGrid, VectorField

logger = logging.getLogger(__name__)


@lru_cache(maxsize=32)
def first_derivative_matrix(N: int, h: float) -> sp.csr_matrix:
    main = np.zeros(N)
    upper = np.full(N - 1, 1.0)
    lower = np.full(N - 1, -1.0)
    D = sp.diags([lower, main, upper], [-1, 0, 1], format="lil")
    D[0, :3] = [-3.0, 4.0, -1.0]
    D[N - 1, N - 3:] = [1.0, -4.0, 3.0]
    return (D / (2.0 * h)).tocsr()


@lru_cache(maxsize=32)
def second_derivative_matrix(N: int, h: float) -> sp.csr_matrix:
    D = sp.diags([np.ones(N - 1), np.full(N, -2.0), np.ones(N - 1)], [-1, 0, 1], format="lil")
    D[0, :4] = [2.0, -5.0, 4.0, -1.0]
    D[N - 1, N - 4:] = [-1.0, 4.0, -5.0, 2.0]
    return (D / h**2).tocsr()


def _kron_axis(matrix: sp.spmatrix, axis: int, dim: int, N: int) -> sp.csr_matrix:
    eye = sp.identity(N, format="csr")
    factors = [matrix if a == axis else eye for a in range(dim)]
    return reduce(lambda a, b: sp.kron(a, b, format="csr"), factors)


@lru_cache(maxsize=16)
def gradient_matrices(grid: SpaceTimeGrid) -> tuple[sp.csr_matrix, ...]:
    """Sparse d/dx_i acting on C-order flattened spatial slices."""
    D1 = first_derivative_matrix(grid.N, grid.h)
    return tuple(_kron_axis(D1, a, grid.dim, grid.N) for a in range(grid.dim))


@lru_cache(maxsize=16)
def laplacian_matrix(grid: SpaceTimeGrid) -> sp.csr_matrix:
    """Sparse Laplacian acting on C-order flattened spatial slices."""
    D2 = second_derivative_matrix(grid.N, grid.h)
    return sum(_kron_axis(D2, a, grid.dim, grid.N) for a in range(grid.dim)).tocsr()


def apply_along_axis(matrix: sp.spmatrix, values: np.ndarray, axis: int) -> np.ndarray:
    """Apply a 1-D sparse operator along one axis of an array."""
    moved = np.moveaxis(values, axis, 0)
    shape = moved.shape
    out = matrix @ moved.reshape(shape[0], -1)
    return np.moveaxis(np.asarray(out).reshape(shape), 0, axis)


def partial(values: np.ndarray, grid: SpaceTimeGrid, axis: int) -> np.ndarray:
    """d/dx_axis of space-time values of shape ``grid.shape``."""
    return apply_along_axis(first_derivative_matrix(grid.N, grid.h), values, axis + 1)


def gradient_values(values: np.ndarray, grid: SpaceTimeGrid) -> list[np.ndarray]:
    return [partial(values, grid, a) for a in range(grid.dim)]


def laplacian_values(values: np.ndarray, grid: SpaceTimeGrid) -> np.ndarray:
    D2 = second_derivative_matrix(grid.N, grid.h)
    return sum(apply_along_axis(D2, values, a + 1) for a in range(grid.dim))


def time_derivative_values(values: np.ndarray, grid: SpaceTimeGrid) -> np.ndarray:
    """Second-order d/dt (centered inside, one-sided at t=0 and t=T)."""
    return np.gradient(values, grid.k, axis=0, edge_order=2)


def gradient(f: ScalarField) -> VectorField:
    """
    Discrete spatial gradient of a scalar field.

    Args:
        f: Field on the full space-time grid.

    Returns:
        VectorField of partial derivatives; flagged time independent when
        ``f`` is.
    """
    comps = gradient_values(f.values, f.grid)
    return VectorField.from_arrays(f.grid, comps, time_independent=f.is_time_independent())


def divergence(F: VectorField) -> ScalarField:
    grid = F.grid
    return ScalarField(grid, sum(partial(c.values, grid, a) for a, c in enumerate(F.components)))


def laplacian(f: ScalarField) -> ScalarField:
    return ScalarField(f.grid, laplacian_values(f.values, f.grid))


def space_integral(values: np.ndarray, grid: SpaceTimeGrid) -> np.ndarray:
    """Trapezoid integral over the box for every time slice."""
    out = values
    for _ in range(grid.dim):
        out = trapezoid(out, dx=grid.h, axis=-1)
    return out


def spacetime_integral(values: np.ndarray, grid: SpaceTimeGrid) -> complex | float:
    """Trapezoid integral over Q."""
    return trapezoid(space_integral(values, grid), dx=grid.k, axis=0)


def boundary_integral(trace: np.ndarray, faces: BoundaryFaces, mask: np.ndarray | None = None) -> float:
    """
    Trapezoid integral over Sigma of a (M+1, count) boundary array.

    Args:
        trace: Values on every (time step, boundary pair).
        faces: Boundary pair table of the grid.
        mask: Optional selector of the pairs that belong to a region.
    """
    w = faces.weights if mask is None else faces.weights * mask
    return trapezoid(trace @ w, dx=faces.grid.k, axis=0)


def normal_derivative_values(values: np.ndarray, faces: BoundaryFaces) -> np.ndarray:
    """
    One-sided second-order outward normal derivative on every boundary pair.

    Returns:
        Array of shape (M+1, count) in the pair order of ``faces``.
    """
    grid = faces.grid
    h = grid.h
    out = np.empty((values.shape[0], faces.count), dtype=values.dtype)
    for face_id, axis, side, sel in faces.face_slices():
        nodes = faces.nodes[sel]
        idx = [nodes[:, a] for a in range(grid.dim)]

        def sample(offset: int) -> np.ndarray:
            shifted = list(idx)
            shifted[axis] = nodes[:, axis] + offset
            return values[(slice(None),) + tuple(shifted)]

        if side == 0:
            # nu = -e_axis, derivative into the box taken one-sided
            out[:, sel] = -(-3.0 * sample(0) + 4.0 * sample(1) - sample(2)) / (2.0 * h)
        else:
            out[:, sel] = (3.0 * sample(0) - 4.0 * sample(-1) + sample(-2)) / (2.0 * h)
    return out
