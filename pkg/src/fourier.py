"""
Spatial spectra of zero-extended fields and the lambda-weighted Sobolev norms.

Slices are zero-padded to ``padding * N`` nodes per axis and transformed with
the unitary (``norm="ortho"``) DFT, so Parseval holds without grid factors.
Frequencies are angular: xi = 2 pi * fftfreq(P, h).
"""
from __future__ import annotations

import logging

import numpy as np
from scipy import fft
from scipy.integrate import trapezoid

from src.grid import ScalarField, SpaceTimeGrid

logger = logging.getLogger(__name__)

DEFAULT_PADDING = 2


def padded_size(grid: SpaceTimeGrid, padding: int = DEFAULT_PADDING) -> int:
    if int(padding) != padding or padding < 1:
        raise ValueError(f"padding must be a positive integer, got {padding}")
    return int(padding) * grid.N


def frequency_axes(grid: SpaceTimeGrid, padding: int = DEFAULT_PADDING) -> tuple[np.ndarray, ...]:
    """Angular frequencies of every padded axis."""
    P = padded_size(grid, padding)
    axis = 2.0 * np.pi * fft.fftfreq(P, d=grid.h)
    return (axis,) * grid.dim


def frequency_mesh(grid: SpaceTimeGrid, padding: int = DEFAULT_PADDING) -> tuple[np.ndarray, ...]:
    return tuple(np.meshgrid(*frequency_axes(grid, padding), indexing="ij"))


def _pad(values: np.ndarray, grid: SpaceTimeGrid, padding: int, lead: int) -> np.ndarray:
    P = padded_size(grid, padding)
    widths = [(0, 0)] * lead + [(0, P - grid.N)] * grid.dim
    return np.pad(values, widths)


def space_fourier(f: ScalarField, t_index: int, padding: int = DEFAULT_PADDING
                  ) -> tuple[np.ndarray, tuple[np.ndarray, ...]]:
    """
    Unitary DFT of one zero-extended time slice.

    Args:
        f: Field to transform.
        t_index: Time step of the slice.
        padding: Padded box size as a multiple of N.

    Returns:
        Tuple ``(spectrum, xi)`` with the complex spectrum on the padded grid
        and the angular frequency axes.
    """
    grid = f.grid
    padded = _pad(f.values[t_index], grid, padding, lead=0)
    return fft.fftn(padded, norm="ortho"), frequency_axes(grid, padding)


def space_fourier_all(values: np.ndarray, grid: SpaceTimeGrid, padding: int = DEFAULT_PADDING) -> np.ndarray:
    """Spectra of every time slice of a ``grid.shape`` array."""
    padded = _pad(values, grid, padding, lead=1)
    return fft.fftn(padded, axes=tuple(range(1, grid.dim + 1)), norm="ortho")


def inverse_space_fourier(spectrum: np.ndarray, grid: SpaceTimeGrid) -> np.ndarray:
    """Inverse of `space_fourier`, cropped back to the box nodes."""
    padded = fft.ifftn(spectrum, norm="ortho")
    return padded[(slice(0, grid.N),) * grid.dim]


def direct_fourier(values: np.ndarray, grid: SpaceTimeGrid, xi: np.ndarray,
                   weighted: bool = False, chunk: int = 256) -> np.ndarray:
    """
    Direct summation sum_x f(x) exp(-i xi.x) over the box nodes.

    Args:
        values: One spatial slice, shape ``grid.spatial_shape``.
        grid: Grid of the slice.
        xi: Frequencies, shape (K, dim).
        weighted: Multiply by trapezoid weights, giving a quadrature of the
            continuous transform instead of the plain DFT sum.
        chunk: Number of frequencies evaluated per vectorized block.

    Returns:
        Complex array of length K.
    """
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    f = values * grid.spatial_weights if weighted else values
    f = f.ravel()
    x = np.stack([c.ravel() for c in grid.coords], axis=1)
    out = np.empty(len(xi), dtype=complex)
    for start in range(0, len(xi), chunk):
        phase = xi[start:start + chunk] @ x.T
        out[start:start + chunk] = np.exp(-1j * phase) @ f
    return out


def spectral_lambda_norm(spectra: np.ndarray, xi_mesh: tuple[np.ndarray, ...], m: float,
                         lam: float, times: np.ndarray, squared: bool = False) -> float:
    """
    Time trapezoid of sum_xi (lam^2 + |xi|^2)^m |f_hat(t, xi)|^2.

    Raises:
        ValueError: If ``lam`` is not positive.
    """
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    xi2 = sum(x**2 for x in xi_mesh)
    weight = (lam**2 + xi2) ** m
    per_time = np.sum(weight * np.abs(spectra) ** 2, axis=tuple(range(1, spectra.ndim)))
    value = float(trapezoid(per_time, times)) if len(times) > 1 else float(per_time[0])
    return value if squared else float(np.sqrt(value))


def sobolev_lambda_norm(f: ScalarField, m: float, lam: float, padding: int = DEFAULT_PADDING,
                        squared: bool = False) -> float:
    """
    Discrete L2(0,T; H^m_lambda) norm of a field.

    Args:
        f: Field whose slices are zero-extended and transformed.
        m: Sobolev order (any real).
        lam: Large parameter, must be positive.
        padding: Padded box size as a multiple of N.
        squared: Return the squared norm.

    Raises:
        ValueError: If ``lam`` is not positive.
    """
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    grid = f.grid
    spectra = space_fourier_all(f.values, grid, padding)
    return spectral_lambda_norm(spectra, frequency_mesh(grid, padding), m, lam, grid.times, squared)
