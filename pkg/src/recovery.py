"""
Reconstruction from cone-restricted data: curl spectra, potentials and q.

For xi orthogonal to a direction omega the Fourier slice of the ray data,
D_omega(xi) = int_{omega-perp} e^{-i xi.k} I F(k, omega) dk, equals
omega . F_hat(xi), and for every eta

    sum_{i<j} (omega_i eta_j - omega_j eta_i) h_hat_ij(xi) = i (eta.xi) D_omega(xi)

with h_ij = d_j F_i - d_i F_j. Each aperture frequency gets one small
least-squares system in the n(n-1)/2 unknowns h_hat_ij.
"""
from __future__ import annotations

import itertools
import logging
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy import fft
from scipy.integrate import cumulative_trapezoid
from scipy.linalg import lstsq
from scipy.sparse.linalg import splu

from src.fourier import direct_fourier
from src.grid import ScalarField, SpaceTimeGrid, VectorField
from src.operators import divergence, gradient, laplacian_matrix, laplacian_values, partial
from src.ray_transform import DirectionCone, RayData, cone_half_angle
from src.utils import DEFAULT_TOLERANCES, Tolerances, unit_vector

logger = logging.getLogger(__name__)

ORTHOGONALITY_TOL = 1e-10
DEFAULT_RADII_COUNT = 8


class ApertureError(ValueError):
    """No cone direction is orthogonal to the requested frequency."""


class CurlToleranceError(ValueError):
    """The field is too far from curl free for the Poincare construction."""


class DivergenceHypothesisError(ValueError):
    """The harmonic-Dirichlet certificate failed: divergences differ."""


class GaugeTraceError(ValueError):
    """The gauge potential does not vanish on the faces of the box."""


def index_pairs(dim: int) -> list[tuple[int, int]]:
    return list(itertools.combinations(range(dim), 2))


@dataclass(frozen=True, eq=False)
class CurlField:
    """
    Upper triangle h_ij, i < j, of the antisymmetric curl matrix.

    Attributes:
        grid: Grid of the source field.
        pairs: Index pairs (i, j) with i < j, in `index_pairs` order.
        values: Shape (len(pairs),) + grid.shape.
    """
    grid: SpaceTimeGrid
    pairs: tuple[tuple[int, int], ...]
    values: np.ndarray

    def component(self, i: int, j: int) -> np.ndarray:
        """h_ij for any i, j; h_ii = 0 and h_ji = -h_ij."""
        if i == j:
            return np.zeros(self.grid.shape)
        if i < j:
            return self.values[self.pairs.index((i, j))]
        return -self.values[self.pairs.index((j, i))]

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0


def curl_matrix(F: VectorField) -> CurlField:
    """Finite-difference h_ij = d_j F_i - d_i F_j for i < j."""
    grid = F.grid
    pairs = index_pairs(grid.dim)
    values = np.stack([partial(F.components[i].values, grid, j) - partial(F.components[j].values, grid, i)
                       for i, j in pairs])
    return CurlField(grid, tuple(pairs), values)


def rotation_to_e2(xi: Sequence[float], theta: float = 0.0) -> np.ndarray:
    """
    Orthogonal A_xi with A_xi xi / |xi| = e_2, from spherical coordinates.

    n = 2: xi_hat = (sin p, cos p), rows (cos p, -sin p) and xi_hat.
    n = 3: xi_hat = (sin p cos th, cos p, sin p sin th), rows
    (cos p cos th, -sin p, cos p sin th), xi_hat and (-sin th, 0, cos th).
    ``theta`` is only used at the pole xi_hat = +-e_2, where it is free.

    Raises:
        ValueError: If xi is zero.
    """
    xi_hat = unit_vector(xi)
    if len(xi_hat) == 2:
        p = np.arctan2(xi_hat[0], xi_hat[1])
        return np.array([[np.cos(p), -np.sin(p)], xi_hat])
    p = np.arccos(np.clip(xi_hat[1], -1.0, 1.0))
    if np.hypot(xi_hat[0], xi_hat[2]) > 1e-14:
        theta = np.arctan2(xi_hat[2], xi_hat[0])
    return np.array([
        [np.cos(p) * np.cos(theta), -np.sin(p), np.cos(p) * np.sin(theta)],
        [np.sin(p) * np.cos(theta), np.cos(p), np.sin(p) * np.sin(theta)],
        [-np.sin(theta), 0.0, np.cos(theta)],
    ])


@dataclass(frozen=True, eq=False)
class FrequencySystem:
    """
    Linear system for the curl spectrum at one frequency.

    Attributes:
        xi: Spatial frequency.
        A: Orthogonal matrix with A xi/|xi| = e_2.
        B: A without its second row; its rows span xi-perp.
        directions: Indices of the cone directions orthogonal to xi.
        coefficients: One row per (direction, eta = e_j), one column per pair.
        span_rank: Rank of the used directions in the B coordinates of xi-perp.
    """
    xi: np.ndarray
    A: np.ndarray
    B: np.ndarray
    directions: tuple[int, ...]
    coefficients: np.ndarray
    span_rank: int

    @property
    def spans_complement(self) -> bool:
        """The directions span xi-perp, so every h_hat_ij is determined."""
        return self.span_rank == len(self.xi) - 1

    def rhs(self, slices: np.ndarray) -> np.ndarray:
        """Right-hand sides i xi_j D_omega(xi) from the slice values of `directions`."""
        return np.concatenate([1j * self.xi * d for d in slices])


def build_frequency_system(xi: Sequence[float], cone: DirectionCone, theta: float = 0.0) -> FrequencySystem:
    """
    Assemble the equations of every cone direction orthogonal to xi.

    Raises:
        ValueError: If xi is zero.
        ApertureError: If no cone direction is orthogonal to xi.
    """
    xi = np.asarray(xi, dtype=float)
    A = rotation_to_e2(xi, theta)
    B = np.delete(A, 1, axis=0)
    xi_hat = unit_vector(xi)
    dirs = tuple(int(d) for d in np.flatnonzero(np.abs(cone.directions @ xi_hat) <= ORTHOGONALITY_TOL))
    if not dirs:
        raise ApertureError(f"frequency outside aperture: xi={np.round(xi, 6).tolist()}")
    n = len(xi)
    pairs = index_pairs(n)
    rows = []
    for d in dirs:
        omega = cone.directions[d]
        for j in range(n):
            eta = np.eye(n)[j]
            rows.append([omega[a] * eta[b] - omega[b] * eta[a] for a, b in pairs])
    span_rank = int(np.linalg.matrix_rank(cone.directions[list(dirs)] @ B.T))
    return FrequencySystem(xi, A, B, dirs, np.array(rows), span_rank)


def aperture_frequencies(cone: DirectionCone, radii: Sequence[float]) -> np.ndarray:
    """
    Frequencies reachable from the sampled directions.

    n = 2: r * omega-perp for every direction; n = 3: r * (omega_m x omega_l)
    normalized, for every independent pair. Both signs of r are used.

    Returns:
        Array of shape (K, n) without duplicates.
    """
    radii = np.asarray(radii, dtype=float)
    signed = np.concatenate([radii, -radii])
    if cone.dim == 2:
        axes = [np.array([-w[1], w[0]]) for w in cone.directions]
    else:
        axes = []
        for m, l in itertools.combinations(range(cone.count), 2):
            cross = np.cross(cone.directions[m], cone.directions[l])
            if np.linalg.norm(cross) > 1e-6:
                axes.append(cross / np.linalg.norm(cross))
    if not axes:
        return np.zeros((0, cone.dim))
    freqs = np.concatenate([np.outer(signed, a) for a in axes])
    _, keep = np.unique(np.round(freqs, 12), axis=0, return_index=True)
    return freqs[np.sort(keep)]


def default_radii(count: int = DEFAULT_RADII_COUNT) -> np.ndarray:
    """Radii pi, 2 pi, ..., count * pi of the aperture frequencies."""
    return np.pi * np.arange(1, count + 1)


def fourier_slice(data: RayData, t_index: int, d: int, xi: np.ndarray) -> complex:
    """D_omega(xi) = sum_k I F(k, omega) e^{-i xi.x_k} dk^(n-1) over the plane rays."""
    points = data.base_points(d)
    dk = data.offsets[1] - data.offsets[0] if len(data.offsets) > 1 else 1.0
    n1 = data.frames.shape[1]
    return complex(np.sum(data.values[t_index, d] * np.exp(-1j * (points @ xi))) * dk**n1)


@dataclass(frozen=True, eq=False)
class CurlSpectrum:
    """
    Recovered h_hat_ij(t, xi) on the aperture frequencies.

    Attributes:
        frequencies: Shape (K, n).
        pairs: Unknown ordering.
        values: Shape (n_times, K, len(pairs)).
        ranks: Rank of each frequency system.
        flags: True where the system was rank deficient or its directions
            do not span xi-perp.
    """
    frequencies: np.ndarray
    pairs: tuple[tuple[int, int], ...]
    values: np.ndarray
    ranks: np.ndarray
    flags: np.ndarray

    @property
    def full_rank_fraction(self) -> float:
        return float(1.0 - np.mean(self.flags)) if len(self.flags) else 0.0

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))


def _time_slices(data: RayData) -> list[int]:
    if np.all(data.values == data.values[:1]):
        return [0]
    return list(range(len(data.times)))


def recover_curl_spectrum(data: RayData, cone: DirectionCone | None = None,
                          frequencies: np.ndarray | None = None, radii: Sequence[float] | None = None,
                          time_indices: Sequence[int] | None = None,
                          lstsq_tol: float = DEFAULT_TOLERANCES.lstsq) -> CurlSpectrum:
    """
    Least-squares curl spectrum on every aperture frequency.

    Args:
        data: Ray transform of an unknown field.
        cone: Directions of the data; defaults to ``data.cone``.
        frequencies: Frequencies to solve for; defaults to `aperture_frequencies`.
        radii: Radii for the default frequencies.
        time_indices: Slices to process; time-constant data is solved once.
        lstsq_tol: Relative singular-value cutoff of the rank check.

    Returns:
        `CurlSpectrum`; rank-deficient cells are flagged with a RuntimeWarning.
    """
    cone = data.cone if cone is None else cone
    n = cone.dim
    pairs = index_pairs(n)
    if frequencies is None:
        freqs = aperture_frequencies(cone, default_radii() if radii is None else radii)
    else:
        freqs = np.atleast_2d(np.asarray(frequencies, dtype=float))
    times = _time_slices(data) if time_indices is None else list(time_indices)
    values = np.zeros((len(times), len(freqs), len(pairs)), dtype=complex)
    ranks = np.zeros(len(freqs), dtype=int)
    spanned = np.zeros(len(freqs), dtype=bool)
    for f, xi in enumerate(freqs):
        system = build_frequency_system(xi, cone)
        spanned[f] = system.spans_complement
        for i, t in enumerate(times):
            slices = np.array([fourier_slice(data, t, d, xi) for d in system.directions])
            solution, _, rank, _ = lstsq(system.coefficients, system.rhs(slices), cond=lstsq_tol)
            values[i, f] = solution
            ranks[f] = rank
    flags = (ranks < len(pairs)) | ~spanned
    if np.any(flags):
        warnings.warn(f"{int(flags.sum())} under-determined frequency cells", category=RuntimeWarning,
                      stacklevel=2)
    logger.debug("Curl spectrum: %d frequencies, %d slices, %d flagged", len(freqs), len(times), int(flags.sum()))
    return CurlSpectrum(freqs, tuple(pairs), values, ranks, flags)


def curl_spectrum_truth(F: VectorField, frequencies: np.ndarray, time_indices: Sequence[int]) -> np.ndarray:
    """Quadrature Fourier transform of curl_matrix(F) at the given frequencies."""
    curl = curl_matrix(F)
    grid = F.grid
    out = np.zeros((len(time_indices), len(frequencies), len(curl.pairs)), dtype=complex)
    for i, t in enumerate(time_indices):
        for p in range(len(curl.pairs)):
            out[i, :, p] = direct_fourier(curl.values[p, t], grid, frequencies, weighted=True)
    return out


@dataclass(frozen=True, eq=False)
class PotentialField:
    """
    Potential Phi with grad Phi close to the source field.

    Attributes:
        potential: Phi, zero at the anchor node (index 0).
        boundary_zero: Whether Phi vanishes on the box faces to tolerance.
        path_residual: Max difference between the two axis orders.
        curl_norm: Sup-norm of the discrete curl of the source field.
    """
    potential: ScalarField
    boundary_zero: bool
    path_residual: float
    curl_norm: float


def _integrate_along(F: VectorField, order: Sequence[int]) -> np.ndarray:
    grid = F.grid
    dim = grid.dim
    phi = np.zeros(grid.shape)
    for step, axis in enumerate(order):
        later = order[step + 1:]
        index = [slice(None)] * (dim + 1)
        for a in later:
            index[a + 1] = slice(0, 1)
        integrand = F.components[axis].values[tuple(index)]
        phi = phi + cumulative_trapezoid(integrand, dx=grid.h, axis=axis + 1, initial=0)
    return phi


def poincare_potential(F: VectorField, tolerances: Tolerances = DEFAULT_TOLERANCES,
                       scale: float | None = None) -> PotentialField:
    """
    Line-integrate a curl-free field from the anchor node along the axes.

    Args:
        F: Gradient candidate.
        tolerances: Supplies ``curl_relative`` and ``potential_boundary``.
        scale: Reference size of the coefficients F was formed from. When
            omitted the curl is measured against sup|F| and the face values
            against sup|Phi|. A difference of two nearly equal fields should
            pass the size of the fields themselves.

    Raises:
        CurlToleranceError: If the discrete curl exceeds
            ``curl_relative * scale``; the message carries the measured norm.
    """
    reference = F.sup_norm() if scale is None else float(scale)
    curl_norm = curl_matrix(F).sup_norm()
    limit = tolerances.curl_relative * reference
    if curl_norm > limit:
        raise CurlToleranceError(f"curl norm {curl_norm:.3e} exceeds tolerance {limit:.3e}")
    order = list(range(F.grid.dim))
    phi = _integrate_along(F, order)
    residual = float(np.max(np.abs(phi - _integrate_along(F, order[::-1]))))
    potential = ScalarField(F.grid, phi)
    on_faces = np.abs(phi[:, ~F.grid.interior_mask])
    # unit box: |Phi| <= sup|F| diam
    face_scale = potential.sup_norm() if scale is None else reference
    boundary_zero = bool(np.max(on_faces) <= tolerances.potential_boundary * face_scale) if face_scale > 0 else True
    return PotentialField(potential, boundary_zero, residual, curl_norm)


@dataclass(frozen=True)
class HarmonicCertificate:
    harmonic_residual: float
    harmonic_bound: float
    potential_norm: float
    bound: float


def dirichlet_poisson(rhs: np.ndarray, grid: SpaceTimeGrid) -> np.ndarray:
    """Solve Lap Phi = rhs inside, Phi = 0 on the faces, for every time slice."""
    interior = grid.interior_mask.ravel()
    L = laplacian_matrix(grid)
    mask = sp.diags(interior.astype(float))
    matrix = (mask @ L + sp.diags(1.0 - interior.astype(float))).tocsc()
    lu = splu(matrix)
    out = np.zeros(grid.shape)
    for n in range(rhs.shape[0]):
        b = np.where(interior, rhs[n].ravel(), 0.0)
        out[n] = lu.solve(b).reshape(grid.spatial_shape)
    return out


def harmonic_certificate(A_diff: VectorField, tolerances: Tolerances = DEFAULT_TOLERANCES,
                         scale: float | None = None) -> tuple[PotentialField, HarmonicCertificate]:
    """
    Check that the gradient candidate has a harmonic potential vanishing on the faces.

    The Laplacian of the potential, relative to ``scale`` (sup|A_diff| when
    omitted), may not exceed ``harmonic_factor * h^2``.

    Raises:
        CurlToleranceError: If A_diff is not curl free.
        DivergenceHypothesisError: If the harmonic residual or the Dirichlet
            potential exceed their tolerances.
        GaugeTraceError: If the potential is harmonic but does not vanish on
            the faces.
    """
    grid = A_diff.grid
    pot = poincare_potential(A_diff, tolerances, scale)
    reference = A_diff.sup_norm() if scale is None else float(scale)
    lap = laplacian_values(pot.potential.values, grid)[:, grid.interior_mask]
    harmonic = float(np.max(np.abs(lap)) / reference) if reference > 0 else 0.0
    harmonic_bound = tolerances.harmonic_factor * grid.h**2
    if harmonic > harmonic_bound:
        raise DivergenceHypothesisError(
            f"harmonic residual {harmonic:.3e} exceeds {harmonic_bound:.3e}: divergences differ")
    if not pot.boundary_zero:
        on_faces = float(np.max(np.abs(pot.potential.values[:, ~grid.interior_mask])))
        raise GaugeTraceError(
            f"potential reaches {on_faces:.3e} on the faces: the gauge does not vanish on the boundary")
    phi = dirichlet_poisson(divergence(A_diff).values, grid)
    norm = float(np.max(np.abs(phi)))
    bound = tolerances.certificate_constant * grid.h**2 * grid.admissible_bound
    if norm > bound:
        raise DivergenceHypothesisError(f"Dirichlet potential {norm:.3e} exceeds C h^2 = {bound:.3e}")
    return pot, HarmonicCertificate(harmonic, harmonic_bound, norm, bound)


def corollary_full_recovery(A_diff: VectorField, div_constraint: bool = True,
                            tolerances: Tolerances = DEFAULT_TOLERANCES,
                            scale: float | None = None) -> VectorField:
    """
    Certified convection difference for divergence-matched pairs.

    With ``div_constraint`` the harmonic-Dirichlet certificate is required
    and the returned difference is grad of the Dirichlet potential (zero up
    to O(h^2)); without it the Poincare gradient is returned uncertified.
    ``scale`` is passed on to `harmonic_certificate`.

    Raises:
        DivergenceHypothesisError: If the certificate fails.
        GaugeTraceError: If the gauge does not vanish on the faces.
    """
    if not div_constraint:
        return gradient(poincare_potential(A_diff, tolerances, scale).potential)
    harmonic_certificate(A_diff, tolerances, scale)
    phi = dirichlet_poisson(divergence(A_diff).values, A_diff.grid)
    return gradient(ScalarField(A_diff.grid, phi))


@dataclass(frozen=True, eq=False)
class QSamples:
    """
    Space-time Fourier samples of q on the aperture.

    Attributes:
        grid: Grid of q.
        padding: Spatial padding factor.
        spectrum: Unitary DFT over (t, padded x); uncovered bins are zero.
        covered: Boolean mask of bins reachable from the cone.
        tau: Angular time frequencies.
        xi: Angular spatial frequency axes.
    """
    grid: SpaceTimeGrid
    padding: int
    spectrum: np.ndarray
    covered: np.ndarray
    tau: np.ndarray
    xi: tuple[np.ndarray, ...]


def aperture_mask(xi_mesh: Sequence[np.ndarray], omega0: Sequence[float], epsilon: float) -> np.ndarray:
    """|xi . omega0| <= sin(alpha) |xi|: xi is orthogonal to some cap direction."""
    w0 = unit_vector(omega0)
    dot = sum(w * x for w, x in zip(w0, xi_mesh))
    norm = np.sqrt(sum(x**2 for x in xi_mesh))
    return np.abs(dot) <= np.sin(cone_half_angle(epsilon)) * norm + 1e-12


def q_fourier_samples(q: ScalarField, cone: DirectionCone, padding: int = 1) -> QSamples:
    """Space-time spectrum of q restricted to the aperture of ``cone``."""
    grid = q.grid
    P = int(padding) * grid.N
    padded = np.pad(q.values, [(0, 0)] + [(0, P - grid.N)] * grid.dim)
    spectrum = fft.fftn(padded, norm="ortho")
    tau = 2.0 * np.pi * fft.fftfreq(grid.M + 1, d=grid.k)
    xi = (2.0 * np.pi * fft.fftfreq(P, d=grid.h),) * grid.dim
    mesh = np.meshgrid(*xi, indexing="ij")
    covered_x = aperture_mask(mesh, cone.omega0, cone.epsilon)
    covered = np.broadcast_to(covered_x[None], spectrum.shape)
    return QSamples(grid, int(padding), np.where(covered, spectrum, 0.0), covered, tau, xi)


@dataclass(frozen=True, eq=False)
class QRecovery:
    """
    Band-limited q from aperture samples, with its coverage bookkeeping.
    """
    q: ScalarField
    coverage: float
    aperture_fraction: float
    uncovered_in_band: int
    complete: bool


def recover_q(samples: QSamples, q_band: float | None = None) -> QRecovery:
    """
    Inverse DFT from the covered bins only.

    Args:
        samples: Aperture samples.
        q_band: Spatial band limit |xi| <= q_band; None means every bin.

    Returns:
        `QRecovery`; a partial recovery is reported with a RuntimeWarning.
    """
    grid = samples.grid
    padded = fft.ifftn(samples.spectrum, norm="ortho")
    values = padded[(slice(None),) + (slice(0, grid.N),) * grid.dim]
    if np.allclose(values.imag, 0.0, atol=1e-13 * max(1.0, float(np.max(np.abs(values))))):
        values = values.real
    mesh = np.meshgrid(*samples.xi, indexing="ij")
    covered_x = samples.covered[0]
    in_band = np.ones_like(covered_x) if q_band is None else np.sqrt(sum(x**2 for x in mesh)) <= q_band
    uncovered = int(np.sum(in_band & ~covered_x))
    coverage = float(np.sum(in_band & covered_x) / max(1, np.sum(in_band)))
    fraction = float(np.mean(covered_x))
    if uncovered:
        warnings.warn(f"partial q recovery: {uncovered} in-band frequency bins outside the aperture",
                      category=RuntimeWarning, stacklevel=2)
    return QRecovery(ScalarField(grid, values), coverage, fraction, uncovered, uncovered == 0)
