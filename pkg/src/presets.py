"""
Named analytic coefficient families used by experiment configs.

Convection presets take a ``scale`` parameter: the sup-norm of the field as
a fraction of the admissible bound 1/(9R). Divergence-free and gradient
presets are built from discrete derivatives, so the discrete identities
div(swirl) = 0 and curl(gauge-bump) = 0 hold to rounding.
"""
from __future__ import annotations

from typing import Any, Callable, Sequence

import numpy as np

from src.grid import ScalarField, SpaceTimeGrid, VectorField
from src.operators import gradient_values, partial

DEFAULT_CENTER = 0.5
DEFAULT_RADIUS = 0.3


def smooth_bump_1d(s: np.ndarray) -> np.ndarray:
    """exp(1 - 1/(1 - s^2)) on |s| < 1, zero elsewhere; equals 1 at s = 0."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
    return out


def _center(grid: SpaceTimeGrid, center: float | Sequence[float]) -> tuple[float, ...]:
    if np.isscalar(center):
        return (float(center),) * grid.dim
    if len(center) != grid.dim:
        raise ValueError(f"center must have {grid.dim} entries, got {len(center)}")
    return tuple(float(c) for c in center)


def tensor_bump(grid: SpaceTimeGrid, center: float | Sequence[float] = DEFAULT_CENTER,
                radius: float = DEFAULT_RADIUS) -> np.ndarray:
    """Spatial product bump prod_i b((x_i - c_i) / radius), shape ``grid.spatial_shape``."""
    ctr = _center(grid, center)
    if radius <= 0 or any(c - radius < 0 or c + radius > 1 for c in ctr):
        raise ValueError(f"Bump support (center {ctr}, radius {radius}) leaves the unit box")
    return np.prod([smooth_bump_1d((x - c) / radius) for x, c in zip(grid.coords, ctr)], axis=0)


def _scaled(grid: SpaceTimeGrid, arrays: list[np.ndarray], scale: float) -> list[np.ndarray]:
    norm = np.max(np.sqrt(sum(np.abs(a) ** 2 for a in arrays)))
    if norm == 0:
        return arrays
    factor = scale * grid.admissible_bound / norm
    return [a * factor for a in arrays]


def _static(grid: SpaceTimeGrid, spatial: list[np.ndarray]) -> VectorField:
    return VectorField.from_arrays(grid, [np.broadcast_to(a[None], grid.shape) for a in spatial],
                                   time_independent=True)


def stream_field(grid: SpaceTimeGrid, psi: np.ndarray) -> list[np.ndarray]:
    """(-d_2 psi, d_1 psi[, 0]) with discrete partials; divergence free on the grid."""
    psi_t = psi[None]
    comps = [-partial(psi_t, grid, 1)[0], partial(psi_t, grid, 0)[0]]
    if grid.dim == 3:
        comps.append(np.zeros(grid.spatial_shape))
    return comps


def gauge_potential(grid: SpaceTimeGrid, center: float | Sequence[float] = DEFAULT_CENTER,
                    radius: float = DEFAULT_RADIUS, scale: float = 0.4) -> ScalarField:
    """
    Time-independent bump Phi whose discrete gradient has sup-norm ``scale / (9R)``.
    """
    bump = tensor_bump(grid, center, radius)
    grads = gradient_values(bump[None], grid)
    norm = np.max(np.sqrt(sum(g[0] ** 2 for g in grads)))
    factor = scale * grid.admissible_bound / norm
    return ScalarField(grid, np.broadcast_to((factor * bump)[None], grid.shape))


def zero_field(grid: SpaceTimeGrid) -> VectorField:
    return VectorField.zeros(grid)


def swirl_field(grid: SpaceTimeGrid, center: float | Sequence[float] = DEFAULT_CENTER,
                radius: float = DEFAULT_RADIUS, scale: float = 0.4) -> VectorField:
    psi = tensor_bump(grid, center, radius)
    return _static(grid, _scaled(grid, stream_field(grid, psi), scale))


def gauge_bump_field(grid: SpaceTimeGrid, center: float | Sequence[float] = DEFAULT_CENTER,
                     radius: float = DEFAULT_RADIUS, scale: float = 0.4) -> VectorField:
    phi = gauge_potential(grid, center, radius, scale)
    comps = gradient_values(phi.values[:1], grid)
    return _static(grid, [g[0] for g in comps])


def smooth_field(grid: SpaceTimeGrid, scale: float = 0.5) -> VectorField:
    x = grid.coords
    comps = [np.sin(np.pi * x[1]), 0.5 * np.sin(np.pi * x[0])]
    if grid.dim == 3:
        comps.append(0.5 * np.sin(np.pi * x[0]) * np.sin(np.pi * x[1]))
    return _static(grid, _scaled(grid, comps, scale))


def bound_field(grid: SpaceTimeGrid) -> VectorField:
    """`smooth_field` scaled to sit exactly on the admissible bound."""
    return smooth_field(grid, scale=1.0)


def pulse_field(grid: SpaceTimeGrid, center: float | Sequence[float] = DEFAULT_CENTER,
                radius: float = DEFAULT_RADIUS, scale: float = 0.4) -> VectorField:
    """Swirl modulated by 1 + 0.5 sin(2 pi t / T); time dependent."""
    psi = tensor_bump(grid, center, radius)
    spatial = _scaled(grid, stream_field(grid, psi), scale / 1.5)
    profile = grid.broadcast_time(1.0 + 0.5 * np.sin(2.0 * np.pi * grid.times / grid.T))
    return VectorField.from_arrays(grid, [profile * a[None] for a in spatial])


def zero_scalar(grid: SpaceTimeGrid) -> ScalarField:
    return ScalarField.zeros(grid)


def constant_scalar(grid: SpaceTimeGrid, value: float = 1.0) -> ScalarField:
    return ScalarField(grid, np.full(grid.shape, float(value)))


def bump_scalar(grid: SpaceTimeGrid, center: float | Sequence[float] = DEFAULT_CENTER,
                radius: float = DEFAULT_RADIUS, amplitude: float = 1.0) -> ScalarField:
    return ScalarField(grid, np.broadcast_to(amplitude * tensor_bump(grid, center, radius)[None], grid.shape))


def mode_scalar(grid: SpaceTimeGrid, bins: Sequence[int] = (0, 3), time_bin: int = 1,
                amplitude: float = 1.0) -> ScalarField:
    """
    Real space-time mode cos(2 pi (k.m / N + j n / (M+1))) on node indices.

    With unit padding it occupies exactly the bins +-(j, k) of the
    space-time DFT.
    """
    if len(bins) != grid.dim:
        raise ValueError(f"bins must have {grid.dim} entries, got {len(bins)}")
    idx = np.indices(grid.spatial_shape)
    phase_x = sum(k * m for k, m in zip(bins, idx)) / grid.N
    phase_t = time_bin * np.arange(grid.M + 1) / (grid.M + 1)
    phase = grid.broadcast_time(phase_t) + phase_x[None]
    return ScalarField(grid, amplitude * np.cos(2.0 * np.pi * phase))


def smooth_scalar(grid: SpaceTimeGrid, amplitude: float = 1.0) -> ScalarField:
    spatial = np.prod([np.sin(np.pi * x) for x in grid.coords], axis=0)
    profile = 1.0 + 0.5 * np.cos(2.0 * np.pi * grid.times / grid.T)
    return ScalarField(grid, amplitude * grid.broadcast_time(profile) * spatial[None])


A_PRESETS: dict[str, Callable[..., VectorField]] = {
    "zero": zero_field,
    "swirl": swirl_field,
    "gauge-bump": gauge_bump_field,
    "smooth": smooth_field,
    "bound": bound_field,
    "pulse": pulse_field,
}

Q_PRESETS: dict[str, Callable[..., ScalarField]] = {
    "zero": zero_scalar,
    "constant": constant_scalar,
    "bump": bump_scalar,
    "mode": mode_scalar,
    "smooth": smooth_scalar,
}


def _split(spec: dict[str, Any] | str) -> tuple[str, dict[str, Any]]:
    if isinstance(spec, str):
        return spec, {}
    params = dict(spec)
    name = params.pop("preset", None)
    if name is None:
        raise ValueError(f"Coefficient spec {spec!r} has no 'preset' key")
    return name, params


def build_vector_field(grid: SpaceTimeGrid, spec: dict[str, Any] | str) -> VectorField:
    """
    Instantiate a convection preset.

    Args:
        grid: Target grid.
        spec: ``{"preset": name, **params}`` or a bare preset name.

    Raises:
        KeyError: If the preset is unknown.
    """
    name, params = _split(spec)
    if name not in A_PRESETS:
        raise KeyError(f"Unknown convection preset {name!r}")
    return A_PRESETS[name](grid, **params)


def build_scalar_field(grid: SpaceTimeGrid, spec: dict[str, Any] | str) -> ScalarField:
    name, params = _split(spec)
    if name not in Q_PRESETS:
        raise KeyError(f"Unknown density preset {name!r}")
    return Q_PRESETS[name](grid, **params)


def combine_vector_fields(grid: SpaceTimeGrid, specs: Sequence[dict[str, Any] | str]) -> VectorField:
    """Sum of several presets, e.g. a swirl plus a gauge bump."""
    fields = [build_vector_field(grid, s) for s in specs]
    total = fields[0]
    for f in fields[1:]:
        total = total + f
    return total
