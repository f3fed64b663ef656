"""
Exponentially growing and decaying geometric-optics solutions.

A growing solution of L v = 0 has the form v = exp(phi) (B_g + R_g) and a
decaying solution of L* v = 0 the form v = exp(-phi) (B_d + R_d), with
phi = lam^2 t + lam omega.x. The weights are kept in log form; only the
unweighted parts B and R are ever stored.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from src.forward import CoefficientPair, cn_defect, crank_nicolson, reverse_time
from src.fourier import sobolev_lambda_norm
from src.grid import ScalarField, SpaceTimeGrid, VectorField
from src.operators import gradient_values
from src.presets import smooth_bump_1d
from src.rays import half_line_exponent
from src.utils import unit_vector

logger = logging.getLogger(__name__)

Kind = Literal["growing", "decaying"]

CUTOFF_MARGIN = 0.1


@dataclass(frozen=True)
class CarlemanWeight:
    """
    The weight phi(t, x) = lam^2 t + lam omega.x.

    ``omega`` is normalized on construction, so d_t phi = |grad phi|^2 holds
    exactly.
    """
    lam: float
    omega: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "omega", tuple(float(w) for w in unit_vector(self.omega)))

    @property
    def direction(self) -> np.ndarray:
        return np.asarray(self.omega)

    def evaluate(self, t, *x) -> np.ndarray:
        return self.lam**2 * t + self.lam * sum(w * xi for w, xi in zip(self.omega, x))

    def on_grid(self, grid: SpaceTimeGrid) -> np.ndarray:
        """phi on every node, shape ``grid.shape``."""
        return self.evaluate(grid.broadcast_time(grid.times), *(c[None] for c in grid.coords))


def time_cutoff(grid: SpaceTimeGrid, margin: float = CUTOFF_MARGIN) -> np.ndarray:
    """
    Smooth bump chi(t) = exp(1 - 1/(1 - s^2)), s = (2t - T)/(T - 2 delta).

    Supported on [delta, T - delta] with delta = margin * T and chi = 1 at T/2.
    """
    T = grid.T
    delta = margin * T
    return smooth_bump_1d((2.0 * grid.times - T) / (T - 2.0 * delta))


def _check_frequency(weight: CarlemanWeight, xi: np.ndarray) -> None:
    if abs(float(xi @ weight.direction)) > 1e-12 * max(1.0, float(np.linalg.norm(xi))):
        raise ValueError(f"Frequency xi={xi.tolist()} is not orthogonal to omega={list(weight.omega)}")


def _exponent_sign(kind: Kind) -> float:
    if kind not in ("growing", "decaying"):
        raise ValueError(f"kind must be 'growing' or 'decaying', got {kind!r}")
    return 1.0 if kind == "growing" else -1.0


def build_amplitude(kind: Kind, A: VectorField, weight: CarlemanWeight, tau: float = 0.0,
                    xi: Sequence[float] | None = None, chi: np.ndarray | None = None) -> ScalarField:
    """
    Amplitude B_g = chi e^{-i(t tau + x.xi)} e^{I} or B_d = chi e^{-I}.

    I is the half-line integral int_0^inf omega.A(t, x + s omega) ds. The
    decaying amplitude carries no oscillatory factor.

    Args:
        kind: ``"growing"`` or ``"decaying"``.
        A: Admissible convection field.
        weight: Carleman weight supplying omega.
        tau: Time frequency (growing only).
        xi: Spatial frequency orthogonal to omega (growing only).
        chi: Time cutoff profile; defaults to `time_cutoff`.

    Returns:
        Complex amplitude field.
    """
    grid = A.grid
    sign = _exponent_sign(kind)
    xi = np.zeros(grid.dim) if xi is None else np.asarray(xi, dtype=float)
    _check_frequency(weight, xi)
    A.check_admissible()
    chi = time_cutoff(grid) if chi is None else np.asarray(chi, dtype=float)
    exponent = half_line_exponent(A, weight.omega)
    values = grid.broadcast_time(chi) * np.exp(sign * exponent)
    if kind == "growing":
        t = grid.broadcast_time(grid.times)
        values = values * np.exp(-1j * (t * tau + grid.dot_coords(xi)[None]))
    return ScalarField(grid, values.astype(complex))


def transport_cancellation_residual(B: ScalarField, A: VectorField, weight: CarlemanWeight,
                                    kind: Kind = "growing") -> float:
    """
    Size of the uncancelled lam-order terms of the conjugated operator on B.

    Returns sup over interior nodes of |2 lam omega.grad B +- 2 lam (omega.A) B|
    divided by 2 lam sup|B| (+ for growing, - for decaying amplitudes).
    """
    grid = B.grid
    sign = _exponent_sign(kind)
    scale = B.sup_norm()
    if scale == 0:
        return 0.0
    grads = gradient_values(B.values, grid)
    directional = sum(w * g for w, g in zip(weight.omega, grads))
    residual = directional + sign * A.dot(weight.omega).values * B.values
    interior = np.abs(residual)[(slice(None),) + (slice(1, -1),) * grid.dim]
    return float(np.max(interior) / scale)


def _conjugated_coefficients(kind: Kind, c: CoefficientPair, weight: CarlemanWeight
                             ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Drift and reaction of the conjugated operator and of its lam-free part.

    Both are given in the marching orientation (time reversed for the
    decaying kind), as (drift, reaction, drift0, reaction0).
    """
    grid = c.grid
    lam = weight.lam
    omega = weight.direction.reshape((grid.dim,) + (1,) * (grid.dim + 1))
    A = c.A.values
    omega_A = c.A.dot(weight.omega).values
    if kind == "growing":
        drift0, reaction0 = 2.0 * A, -c.q_tilde.values
        drift = 2.0 * lam * omega + drift0
        reaction = 2.0 * lam * omega_A + reaction0
        return np.broadcast_to(drift, A.shape), reaction, drift0, reaction0
    drift0, reaction0 = -2.0 * A, -c.q_tilde_star.values
    drift = -2.0 * lam * omega + drift0
    reaction = 2.0 * lam * omega_A + reaction0
    return (reverse_time(np.broadcast_to(drift, A.shape), 1), reverse_time(reaction),
            reverse_time(drift0, 1), reverse_time(reaction0))


def solve_remainder(kind: Kind, c: CoefficientPair, B: ScalarField, weight: CarlemanWeight) -> ScalarField:
    """
    Remainder R with L_phi R = -L_phi B (growing) or L*_phi R = -L*_phi B (decaying).

    The lam-order terms of L_phi B cancel analytically by the transport
    identity, so only the lam-free part of the operator enters the source.
    R vanishes on the box faces, at t = 0 (growing) or at t = T (decaying).

    Raises:
        SolverError: If a linear solve fails; the message carries lam and the grid.
    """
    grid = c.grid
    _exponent_sign(kind)
    drift, reaction, drift0, reaction0 = _conjugated_coefficients(kind, c, weight)
    B_march = B.values if kind == "growing" else reverse_time(B.values)
    source_half = -cn_defect(grid, B_march, drift0, reaction0)
    logger.debug("Remainder solve: kind=%s lam=%g omega=%s N=%d M=%d", kind, weight.lam, weight.omega,
                 grid.N, grid.M)
    R = crank_nicolson(grid, drift=drift, reaction=reaction, source_half=source_half,
                       context=f"{kind} remainder, lam={weight.lam:g}")
    return ScalarField(grid, R if kind == "growing" else reverse_time(R))


def solve_conjugated_dirichlet(c: CoefficientPair, weight: CarlemanWeight, boundary: ScalarField) -> ScalarField:
    """
    Solve L_phi w = 0 with w(0) = 0 and w = ``boundary`` on the box faces.

    Only the face values of ``boundary`` are read; they must vanish at t = 0.
    """
    drift, reaction, _, _ = _conjugated_coefficients("growing", c, weight)
    W = crank_nicolson(c.grid, drift=drift, reaction=reaction, boundary=boundary.values,
                       context=f"conjugated Dirichlet solve, lam={weight.lam:g}")
    return ScalarField(c.grid, W)


@dataclass(frozen=True, eq=False)
class GOSolution:
    """
    A geometric-optics solution e^{+-phi} (B + R) kept in unweighted form.

    Attributes:
        kind: ``"growing"`` or ``"decaying"``.
        weight: Carleman weight (lam, omega).
        tau: Time frequency of the growing amplitude.
        xi: Spatial frequency, orthogonal to omega.
        chi: Time cutoff profile.
        amplitude: B.
        remainder: R.
    """
    kind: Kind
    weight: CarlemanWeight
    tau: float
    xi: tuple[float, ...]
    chi: np.ndarray
    amplitude: ScalarField
    remainder: ScalarField
    residual: float = field(default=float("nan"))

    @property
    def grid(self) -> SpaceTimeGrid:
        return self.amplitude.grid

    @property
    def unweighted(self) -> ScalarField:
        return self.amplitude + self.remainder

    def log_weight(self) -> np.ndarray:
        """+phi for growing and -phi for decaying solutions."""
        return _exponent_sign(self.kind) * self.weight.on_grid(self.grid)

    def assemble(self) -> ScalarField:
        """
        The weighted field v itself.

        Raises:
            FloatingPointError: If exp(+-phi) overflows double precision.
        """
        with np.errstate(over="raise"):
            values = np.exp(self.log_weight()) * self.unweighted.values
        return ScalarField(self.grid, values)

    def remainder_norm(self, padding: int = 2) -> float:
        """||R||_{L2(0,T; H^1_lam)}."""
        return sobolev_lambda_norm(self.remainder, 1.0, self.weight.lam, padding=padding)

    def to_metadata(self) -> dict:
        return {
            "kind": self.kind,
            "lambda": self.weight.lam,
            "omega": list(self.weight.omega),
            "xi": list(self.xi),
            "tau": self.tau,
            "residual": self.residual,
        }


def go_residual(v: GOSolution, c: CoefficientPair) -> float:
    """
    Discrete residual of the full conjugated operator on B + R, relative to |B|.

    Uses the Crank-Nicolson defect of the marching scheme, so the lam-order
    transport terms left over by the discretization are what remains.
    """
    grid = c.grid
    drift, reaction, _, _ = _conjugated_coefficients(v.kind, c, v.weight)
    W = v.unweighted.values if v.kind == "growing" else reverse_time(v.unweighted.values)
    defect = cn_defect(grid, W, drift, reaction)
    B = v.amplitude.values if v.kind == "growing" else reverse_time(v.amplitude.values)
    scale = np.linalg.norm(0.5 * (B[1:] + B[:-1]))
    if scale == 0:
        return 0.0
    return float(np.linalg.norm(defect) / scale)


def build_go_solution(kind: Kind, c: CoefficientPair, weight: CarlemanWeight, tau: float = 0.0,
                      xi: Sequence[float] | None = None, chi: np.ndarray | None = None) -> GOSolution:
    """Amplitude, remainder and residual of one geometric-optics solution."""
    grid = c.grid
    xi_arr = np.zeros(grid.dim) if xi is None else np.asarray(xi, dtype=float)
    chi = time_cutoff(grid) if chi is None else np.asarray(chi, dtype=float)
    B = build_amplitude(kind, c.A, weight, tau=tau if kind == "growing" else 0.0,
                        xi=xi_arr if kind == "growing" else None, chi=chi)
    R = solve_remainder(kind, c, B, weight)
    solution = GOSolution(kind, weight, float(tau), tuple(float(x) for x in xi_arr), chi, B, R)
    residual = go_residual(solution, c)
    logger.info("GO %s solution: lam=%g residual=%.3e", kind, weight.lam, residual)
    return GOSolution(kind, weight, float(tau), tuple(float(x) for x in xi_arr), chi, B, R, residual)
