"""
Line integrals of omega . F along rays through the unit box.

Fields are extended by zero outside the box, so every ray is truncated to
its intersection with [0,1]^n (slab method). Off-grid samples use
multilinear interpolation and the integral is a composite trapezoid rule
with step at most ``step_fraction * h``.
"""
from __future__ import annotations

import logging
from typing import Literal, Sequence

import numpy as np
from scipy.integrate import trapezoid
from scipy.interpolate import RegularGridInterpolator

from src.grid import SpaceTimeGrid, VectorField
from src.utils import unit_vector

logger = logging.getLogger(__name__)

SRange = Literal["half", "full"]

DEFAULT_STEP_FRACTION = 0.5
RAY_CHUNK = 4096


def box_intersection(points: np.ndarray, omega: np.ndarray, half_line: bool) -> tuple[np.ndarray, np.ndarray]:
    """
    Parameter interval [s_lo, s_hi] of x + s*omega inside [0,1]^n.

    Rays missing the box get s_hi <= s_lo.
    """
    n_pts = len(points)
    s_lo = np.full(n_pts, -np.inf)
    s_hi = np.full(n_pts, np.inf)
    for a, w in enumerate(omega):
        x = points[:, a]
        if abs(w) < 1e-15:
            outside = (x < 0.0) | (x > 1.0)
            s_hi[outside] = -np.inf
            continue
        s1 = -x / w
        s2 = (1.0 - x) / w
        s_lo = np.maximum(s_lo, np.minimum(s1, s2))
        s_hi = np.minimum(s_hi, np.maximum(s1, s2))
    if half_line:
        s_lo = np.maximum(s_lo, 0.0)
    return s_lo, s_hi


def slice_interpolator(values: np.ndarray, grid: SpaceTimeGrid) -> RegularGridInterpolator:
    return RegularGridInterpolator((grid.axis,) * grid.dim, values, method="linear",
                                   bounds_error=False, fill_value=0.0)


def ray_integrals(values: np.ndarray, grid: SpaceTimeGrid, points: np.ndarray, omega: Sequence[float],
                  half_line: bool = False, step_fraction: float = DEFAULT_STEP_FRACTION) -> np.ndarray:
    """
    Integrate a scalar slice along many parallel rays.

    Args:
        values: Spatial slice of the integrand (already dotted with omega).
        grid: Grid of the slice.
        points: Base points of the rays, shape (K, dim).
        omega: Common unit direction.
        half_line: Integrate over s >= 0 only.
        step_fraction: Quadrature step as a fraction of h.

    Returns:
        Array of K line integrals.
    """
    omega = unit_vector(omega)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    interp = slice_interpolator(values, grid)
    s_lo, s_hi = box_intersection(points, omega, half_line)
    length = np.where(s_hi > s_lo, s_hi - s_lo, 0.0)
    out = np.zeros(len(points), dtype=values.dtype if np.iscomplexobj(values) else float)
    if not np.any(length > 0):
        return out
    n_samples = int(np.ceil(length.max() / (step_fraction * grid.h))) + 1
    unit = np.linspace(0.0, 1.0, n_samples)
    for start in range(0, len(points), RAY_CHUNK):
        sl = slice(start, start + RAY_CHUNK)
        live = length[sl] > 0
        if not np.any(live):
            continue
        base = points[sl][live]
        s = s_lo[sl][live, None] + length[sl][live, None] * unit[None, :]
        samples = base[:, None, :] + s[..., None] * omega[None, None, :]
        np.clip(samples, 0.0, 1.0, out=samples)
        g = interp(samples.reshape(-1, grid.dim)).reshape(s.shape)
        # out[sl] is a view, so the masked assignment writes through
        out[sl][live] = trapezoid(g, dx=1.0, axis=1) * (length[sl][live] / (n_samples - 1))
    return out


def directional_slice(F: VectorField, t_index: int, omega: Sequence[float]) -> np.ndarray:
    """omega . F at one time step."""
    return sum(w * c.values[t_index] for w, c in zip(omega, F.components))


def ray_quadrature(F: VectorField, t_index: int, x: Sequence[float], omega: Sequence[float],
                   s_range: SRange = "full", step_fraction: float = DEFAULT_STEP_FRACTION) -> float:
    """
    Integral of omega . F(t, x + s omega) over s in [0, inf) or (-inf, inf).

    Args:
        F: Vector field, zero outside the box.
        t_index: Time step.
        x: Base point.
        omega: Unit direction.
        s_range: ``"half"`` for [0, inf) or ``"full"`` for the whole line.
        step_fraction: Quadrature step as a fraction of h.

    Returns:
        The line integral.
    """
    if s_range not in ("half", "full"):
        raise ValueError(f"s_range must be 'half' or 'full', got {s_range!r}")
    omega = unit_vector(omega)
    values = directional_slice(F, t_index, omega)
    return float(ray_integrals(values, F.grid, np.asarray([x], dtype=float), omega,
                               half_line=(s_range == "half"), step_fraction=step_fraction)[0])


def half_line_exponent(F: VectorField, omega: Sequence[float],
                       step_fraction: float = DEFAULT_STEP_FRACTION) -> np.ndarray:
    """
    int_0^inf omega . F(t, x + s omega) ds at every node of the grid.

    Computed once and broadcast when F is time independent.

    Returns:
        Real array of shape ``grid.shape``.
    """
    grid = F.grid
    omega = unit_vector(omega)
    points = np.stack([c.ravel() for c in grid.coords], axis=1)
    steps = [0] if F.time_independent else range(grid.M + 1)
    slices = []
    for n in steps:
        values = directional_slice(F, n, omega)
        slices.append(ray_integrals(values, grid, points, omega, half_line=True,
                                    step_fraction=step_fraction).reshape(grid.spatial_shape))
    logger.debug("Half-line exponent: %d slices, omega=%s", len(slices), np.round(omega, 6))
    if F.time_independent:
        return np.broadcast_to(slices[0], grid.shape).copy()
    return np.stack(slices)
