"""
Limited-angle ray transform of time-dependent vector fields.

Directions are sampled in the cap |omega - omega0| <= eps. For every
direction the lines are indexed by offsets k on the hyperplane omega-perp,
through the box centre, covering the box shadow.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import qmc

from src.grid import VectorField
from src.rays import DEFAULT_STEP_FRACTION, directional_slice, ray_integrals
from src.utils import unit_vector

logger = logging.getLogger(__name__)

CONE_SHRINK = 1e-9
BOX_CENTER = 0.5


def plane_frame(omega: Sequence[float]) -> np.ndarray:
    """
    Orthonormal basis of omega-perp, shape (n-1, n).

    Gram-Schmidt seeded with omega and continued with the standard basis.
    """
    omega = unit_vector(omega)
    n = len(omega)
    basis = [omega]
    for e in np.eye(n):
        v = e - sum((e @ b) * b for b in basis)
        norm = np.linalg.norm(v)
        if norm > 1e-8:
            basis.append(v / norm)
        if len(basis) == n:
            break
    return np.array(basis[1:])


def cone_half_angle(epsilon: float) -> float:
    """Geodesic radius of the cap whose chordal radius is ``epsilon``."""
    return 2.0 * np.arcsin(epsilon / 2.0) * (1.0 - CONE_SHRINK)


def perturbation_family(omega0: Sequence[float], a: float, k: int = 0) -> np.ndarray:
    """cos(a) omega0 + sin(a) u_k with u_k the k-th vector of `plane_frame`."""
    omega0 = unit_vector(omega0)
    if a == 0:
        return omega0
    return np.cos(a) * omega0 + np.sin(a) * plane_frame(omega0)[k]


@dataclass(frozen=True, eq=False)
class DirectionCone:
    """
    Directions within chordal distance epsilon of omega0; omega0 comes first.
    """
    omega0: tuple[float, ...]
    epsilon: float
    directions: np.ndarray

    def __post_init__(self) -> None:
        dirs = np.atleast_2d(np.asarray(self.directions, dtype=float))
        w0 = np.asarray(self.omega0)
        if not np.allclose(np.linalg.norm(dirs, axis=1), 1.0, atol=1e-12):
            raise ValueError("Cone directions must be unit vectors")
        if np.any(np.linalg.norm(dirs - w0, axis=1) > self.epsilon + 1e-12):
            raise ValueError("Cone direction outside |omega - omega0| <= eps")
        dirs.setflags(write=False)
        object.__setattr__(self, "directions", dirs)

    @property
    def count(self) -> int:
        return len(self.directions)

    @property
    def dim(self) -> int:
        return len(self.omega0)

    @property
    def half_angle(self) -> float:
        return cone_half_angle(self.epsilon)

    def direction_table(self) -> list[dict]:
        return [{"index": i, **{f"omega{a + 1}": float(w) for a, w in enumerate(d)}}
                for i, d in enumerate(self.directions)]


def sample_cone(omega0: Sequence[float], epsilon: float, count: int) -> DirectionCone:
    """
    Deterministic sampling of the cap |omega - omega0| <= eps.

    The list starts with omega0, then the perturbation family
    cos(a) omega0 + sin(a) u_k for a = +-alpha (alpha the cap angle), then an
    unscrambled Halton fill of the cap (uniform in cos of the polar angle
    for n = 3).

    Args:
        omega0: Central direction (normalized here).
        epsilon: Chordal radius, 0 < eps < 1/2.
        count: Number of directions D >= 1.

    Raises:
        ValueError: If eps or count are out of range.
    """
    if not 0.0 < epsilon < 0.5:
        raise ValueError(f"epsilon must lie in (0, 0.5), got {epsilon}")
    if int(count) != count or count < 1:
        raise ValueError(f"count must be a positive integer, got {count}")
    w0 = unit_vector(omega0)
    n = len(w0)
    if n not in (2, 3):
        raise ValueError(f"omega0 must have 2 or 3 components, got {n}")
    alpha = cone_half_angle(epsilon)
    frame = plane_frame(w0)

    dirs = [w0]
    for k in range(n - 1):
        for a in (alpha, -alpha):
            dirs.append(perturbation_family(w0, a, k))
    remaining = count - len(dirs)
    if remaining > 0:
        sampler = qmc.Halton(d=n - 1, scramble=False)
        # skip 0 and the base-2 midpoint; for n = 2 the midpoint maps back to omega0
        sampler.fast_forward(2)
        pts = sampler.random(remaining)
        if n == 2:
            beta = alpha * (2.0 * pts[:, 0] - 1.0)
            fill = np.cos(beta)[:, None] * w0 + np.sin(beta)[:, None] * frame[0]
        else:
            cos_beta = 1.0 - pts[:, 0] * (1.0 - np.cos(alpha))
            sin_beta = np.sqrt(np.clip(1.0 - cos_beta**2, 0.0, None))
            gamma = 2.0 * np.pi * pts[:, 1]
            fill = (cos_beta[:, None] * w0 + sin_beta[:, None]
                    * (np.cos(gamma)[:, None] * frame[0] + np.sin(gamma)[:, None] * frame[1]))
        dirs.extend(fill)
    dirs = np.array(dirs[:count])
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return DirectionCone(tuple(float(w) for w in w0), float(epsilon), dirs)


def plane_offsets(dim: int, resolution: int) -> np.ndarray:
    half = np.sqrt(dim) / 2.0
    return np.linspace(-half, half, resolution)


@dataclass(frozen=True, eq=False)
class RayData:
    """
    Line integrals I F(t, k, omega) over a direction cone.

    Attributes:
        cone: Directions used.
        offsets: 1-D offsets along each axis of the plane frame.
        frames: Plane frame per direction, shape (D, n-1, n).
        times: Time values of the slices.
        values: Shape (M+1, D, P^(n-1)) with k in C order over the frame axes.
        flags: Rays whose value could not be trusted (attenuated data only).
    """
    cone: DirectionCone
    offsets: np.ndarray
    frames: np.ndarray
    times: np.ndarray
    values: np.ndarray
    flags: np.ndarray | None = field(default=None)

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.values)):
            raise ValueError("RayData contains non-finite values")

    def base_points(self, d: int) -> np.ndarray:
        """Ray base points of direction ``d``, shape (P^(n-1), n)."""
        return ray_base_points(self.frames[d], self.offsets)

    def plane_coordinates(self) -> np.ndarray:
        """Offsets k of every ray, shape (P^(n-1), n-1)."""
        n1 = self.frames.shape[1]
        mesh = np.meshgrid(*([self.offsets] * n1), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def to_rows(self) -> list[dict]:
        rows = []
        for n, t in enumerate(self.times):
            for d in range(self.values.shape[1]):
                for k, value in enumerate(self.values[n, d]):
                    rows.append({"t": float(t), "omega_index": d, "k_index": k, "value": float(value)})
        return rows


def ray_base_points(frame: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    n1, n = frame.shape
    mesh = np.meshgrid(*([offsets] * n1), indexing="ij")
    coords = np.stack([m.ravel() for m in mesh], axis=1)
    return BOX_CENTER + coords @ frame


def transform(F: VectorField, cone: DirectionCone, plane_resolution: int | None = None,
              step_fraction: float = DEFAULT_STEP_FRACTION) -> RayData:
    """
    Full-line ray transform of F for every time step and cone direction.

    Args:
        F: Field, extended by zero outside the box.
        cone: Directions.
        plane_resolution: Offsets per plane axis; defaults to N.
        step_fraction: Quadrature step as a fraction of h.

    Returns:
        `RayData` on the plane offsets.
    """
    grid = F.grid
    if cone.dim != grid.dim:
        raise ValueError(f"Cone dimension {cone.dim} does not match grid dimension {grid.dim}")
    P = grid.N if plane_resolution is None else int(plane_resolution)
    offsets = plane_offsets(grid.dim, P)
    frames = np.array([plane_frame(w) for w in cone.directions])
    steps = [0] if F.time_independent else range(grid.M + 1)
    values = np.zeros((len(steps), cone.count, P ** (grid.dim - 1)))
    for d, omega in enumerate(cone.directions):
        points = ray_base_points(frames[d], offsets)
        for i, n in enumerate(steps):
            values[i, d] = ray_integrals(directional_slice(F, n, omega), grid, points, omega,
                                         step_fraction=step_fraction)
    if F.time_independent:
        values = np.broadcast_to(values, (grid.M + 1,) + values.shape[1:]).copy()
    logger.debug("Ray transform: D=%d P=%d slices=%d", cone.count, P, len(steps))
    return RayData(cone, offsets, frames, grid.times.copy(), values)


def attenuated_moment(A: VectorField, cone: DirectionCone, plane_resolution: int | None = None) -> RayData:
    """
    1 - exp(-I A) per ray.

    Rays with |1 - exp(-I A)| >= 1 are flagged and reported with a
    RuntimeWarning.
    """
    A.check_admissible()
    linear = transform(A, cone, plane_resolution)
    values = -np.expm1(-linear.values)
    flags = np.abs(values) >= 1.0
    if np.any(flags):
        warnings.warn(f"{int(flags.sum())} attenuated rays out of range", category=RuntimeWarning, stacklevel=2)
    return RayData(cone, linear.offsets, linear.frames, linear.times, values, flags)


def recover_ray_data(data: RayData) -> RayData:
    """
    Invert the attenuation: I A = -log(1 - y).

    Raises:
        ValueError: If any ray is flagged.
    """
    if data.flags is not None and np.any(data.flags):
        raise ValueError(f"Cannot invert {int(data.flags.sum())} flagged attenuated rays")
    return RayData(data.cone, data.offsets, data.frames, data.times, -np.log1p(-data.values))
