"""
Numerical checks of the boundary Carleman estimate and its operator splitting.

For phi = lam^2 t + lam omega.x the conjugated operator
L_phi = e^{-phi} L e^{phi} splits as P1 + P2 + P3 with

    P1 = -Lap,  P2 = d_t - 2 lam omega.grad,  P3 = -2 A.grad - 2 lam omega.A + q~

and the estimate compares e^{-2 phi}-weighted integrals of u, grad u,
u(T) and d_nu u on Sigma_+ against e^{-2 phi} |L u|^2 and the Sigma_- term.
The weights span hundreds of orders of magnitude, so every weighted
integral is accumulated in log space.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from src.forward import CoefficientPair, apply_operator
from src.go_builder import CarlemanWeight, time_cutoff
from src.grid import BoundaryRegion, RegionKind, ScalarField, SpaceTimeGrid, boundary_faces
from src.operators import (boundary_integral, gradient_values, laplacian_values, normal_derivative_values,
                           space_integral, spacetime_integral, time_derivative_values)
from src.presets import tensor_bump
from src.utils import DEFAULT_TOLERANCES, Tolerances

logger = logging.getLogger(__name__)

TERM_NAMES = ("term1", "term2", "term3", "term4", "term5", "term6")
SUITE_CENTERS = (0.5, 0.35, 0.65)
SUITE_RADII = (0.2, 0.3)


class PreconditionError(ValueError):
    """A test function violates u(0) = 0 or u = 0 on Sigma."""


def _omega_column(weight: CarlemanWeight, grid: SpaceTimeGrid) -> np.ndarray:
    return weight.direction.reshape((grid.dim,) + (1,) * (grid.dim + 1))


def split_operator(c: CoefficientPair, weight: CarlemanWeight, v: ScalarField
                   ) -> tuple[ScalarField, ScalarField, ScalarField]:
    """
    The three pieces P1 v, P2 v, P3 v of the conjugated operator.

    Args:
        c: Coefficients supplying A and q~.
        weight: Carleman weight (lam, omega).
        v: Field vanishing on Sigma.

    Returns:
        Tuple ``(P1v, P2v, P3v)``.
    """
    grid = c.grid
    lam = weight.lam
    grads = gradient_values(v.values, grid)
    omega_grad = sum(w * g for w, g in zip(weight.omega, grads))
    A_grad = sum(a.values * g for a, g in zip(c.A.components, grads))
    omega_A = c.A.dot(weight.omega).values
    P1 = -laplacian_values(v.values, grid)
    P2 = time_derivative_values(v.values, grid) - 2.0 * lam * omega_grad
    P3 = -2.0 * A_grad - 2.0 * lam * omega_A * v.values + c.q_tilde.values * v.values
    return ScalarField(grid, P1), ScalarField(grid, P2), ScalarField(grid, P3)


def split_adjoint_operator(c: CoefficientPair, weight: CarlemanWeight, v: ScalarField
                           ) -> tuple[ScalarField, ScalarField, ScalarField]:
    """
    Pieces of L*_phi = e^{phi} L* e^{-phi}:
    P1* = -Lap, P2* = -d_t + 2 lam omega.grad, P3* = 2 A.grad - 2 lam omega.A + q~*.
    """
    grid = c.grid
    lam = weight.lam
    grads = gradient_values(v.values, grid)
    omega_grad = sum(w * g for w, g in zip(weight.omega, grads))
    A_grad = sum(a.values * g for a, g in zip(c.A.components, grads))
    omega_A = c.A.dot(weight.omega).values
    P1 = -laplacian_values(v.values, grid)
    P2 = -time_derivative_values(v.values, grid) + 2.0 * lam * omega_grad
    P3 = 2.0 * A_grad - 2.0 * lam * omega_A * v.values + c.q_tilde_star.values * v.values
    return ScalarField(grid, P1), ScalarField(grid, P2), ScalarField(grid, P3)


def conjugated_operator(c: CoefficientPair, weight: CarlemanWeight, v: ScalarField,
                        adjoint: bool = False) -> ScalarField:
    """L_phi v (or L*_phi v) from its expanded form, independent of the splitting."""
    grid = c.grid
    lam = weight.lam
    omega = _omega_column(weight, grid)
    grads = np.stack(gradient_values(v.values, grid))
    omega_A = c.A.dot(weight.omega).values
    dt = time_derivative_values(v.values, grid)
    lap = laplacian_values(v.values, grid)
    drift = np.sum((2.0 * lam * omega + 2.0 * c.A.values) * grads, axis=0)
    if adjoint:
        values = -dt - lap + drift + (c.q_tilde_star.values - 2.0 * lam * omega_A) * v.values
    else:
        values = dt - lap - drift + (c.q_tilde.values - 2.0 * lam * omega_A) * v.values
    return ScalarField(grid, values)


def check_preconditions(u: ScalarField, tol: float = DEFAULT_TOLERANCES.zero_solution) -> None:
    """
    Raises:
        PreconditionError: Naming ``u(0) != 0`` or ``u|Sigma != 0``.
    """
    scale = max(1.0, u.sup_norm())
    initial = float(np.max(np.abs(u.values[0])))
    if initial > tol * scale:
        raise PreconditionError(f"u(0) != 0 (max |u(0)| = {initial:.3e})")
    on_sigma = float(np.max(np.abs(boundary_faces(u.grid).gather(u.values))))
    if on_sigma > tol * scale:
        raise PreconditionError(f"u|Sigma != 0 (max |u| on Sigma = {on_sigma:.3e})")


def check_p2_lower_bound(weight: CarlemanWeight, v: ScalarField) -> float:
    """
    Ratio int |P2 v|^2 / [((1 + 4 lam^2) / (16 R^2)) int |v|^2].

    The vacuous case v = 0 is reported as 1.
    """
    grid = v.grid
    lam = weight.lam
    grads = gradient_values(v.values, grid)
    P2 = time_derivative_values(v.values, grid) - 2.0 * lam * sum(w * g for w, g in zip(weight.omega, grads))
    lhs = float(np.real(spacetime_integral(np.abs(P2) ** 2, grid)))
    mass = float(np.real(spacetime_integral(np.abs(v.values) ** 2, grid)))
    if mass == 0:
        return 1.0
    return lhs / ((1.0 + 4.0 * lam**2) / (16.0 * grid.radius**2) * mass)


def p2_bound_passed(ratio: float, grid: SpaceTimeGrid,
                    slack_factor: float = DEFAULT_TOLERANCES.p2_slack_factor) -> bool:
    return ratio >= 1.0 - slack_factor * grid.h


def check_p1p2_identity(weight: CarlemanWeight, v: ScalarField) -> dict[str, float]:
    """
    Compare 2 Re int P1v conj(P2v) with int |grad v(T)|^2 + 2 lam int_Sigma omega.nu |d_nu v|^2.

    Args:
        weight: Carleman weight.
        v: Field with v(0) = 0 and v = 0 on Sigma.

    Returns:
        Mapping with ``lhs``, ``rhs`` and ``relative_error``.

    Raises:
        PreconditionError: If v violates the vanishing conditions.
    """
    check_preconditions(v)
    grid = v.grid
    lam = weight.lam
    grads = gradient_values(v.values, grid)
    P1 = -laplacian_values(v.values, grid)
    P2 = time_derivative_values(v.values, grid) - 2.0 * lam * sum(w * g for w, g in zip(weight.omega, grads))
    lhs = float(np.real(2.0 * spacetime_integral(P1 * np.conj(P2), grid)))
    grad_T = sum(np.abs(g[-1]) ** 2 for g in grads)
    faces = boundary_faces(grid)
    dn = normal_derivative_values(v.values, faces)
    omega_nu = faces.normals @ weight.direction
    rhs = float(space_integral(grad_T[None], grid)[0]) + 2.0 * lam * float(
        boundary_integral(np.abs(dn) ** 2 * omega_nu[None, :], faces))
    scale = max(abs(lhs), abs(rhs))
    return {"lhs": lhs, "rhs": rhs, "relative_error": abs(lhs - rhs) / scale if scale > 0 else 0.0}


def log_weighted_sum(log_weight: np.ndarray, density: np.ndarray, quad: np.ndarray) -> float:
    """log sum(exp(log_weight) * density * quad) over the positive entries, -inf if none."""
    density, quad = np.broadcast_arrays(density, quad)
    log_weight = np.broadcast_to(log_weight, density.shape)
    positive = (density > 0) & (quad > 0)
    if not np.any(positive):
        return -np.inf
    return float(logsumexp(log_weight[positive] + np.log(density[positive]) + np.log(quad[positive])))


def log_carleman_terms(c: CoefficientPair, weight: CarlemanWeight, u: ScalarField) -> np.ndarray:
    """
    Logarithms of the six terms of the boundary Carleman estimate.

    Order: lam^2 int e^{-2phi}|u|^2, int e^{-2phi}|grad u|^2,
    int_Omega e^{-2phi(T)}|u(T)|^2, lam int_{Sigma_+} e^{-2phi}|d_nu u|^2 |omega.nu|
    (left side), then int e^{-2phi}|L u|^2 and
    lam int_{Sigma_-} e^{-2phi}|d_nu u|^2 |omega.nu| (right side).
    """
    grid = c.grid
    lam = weight.lam
    log_w = -2.0 * weight.on_grid(grid)
    quad = grid.weights
    grads = gradient_values(u.values, grid)
    Lu = apply_operator(c, u).values

    faces = boundary_faces(grid)
    t = grid.times[:, None]
    x = [faces.coords[None, :, a] for a in range(grid.dim)]
    log_w_sigma = -2.0 * weight.evaluate(t, *x)
    dn2 = np.abs(normal_derivative_values(u.values, faces)) ** 2
    sigma_plus = BoundaryRegion.resolve(grid, RegionKind.SIGMA_PLUS, weight.omega, 0.0).mask
    sigma_minus = BoundaryRegion.resolve(grid, RegionKind.SIGMA_MINUS, weight.omega, 0.0).mask
    omega_nu = np.abs(faces.normals @ weight.direction)
    quad_sigma = grid.time_weights[:, None] * (faces.weights * omega_nu)[None, :]

    log_lam = np.log(lam)
    return np.array([
        2.0 * log_lam + log_weighted_sum(log_w, np.abs(u.values) ** 2, quad),
        log_weighted_sum(log_w, sum(np.abs(g) ** 2 for g in grads), quad),
        log_weighted_sum(log_w[-1], np.abs(u.values[-1]) ** 2, grid.spatial_weights),
        log_lam + log_weighted_sum(log_w_sigma, dn2, quad_sigma * sigma_plus[None, :]),
        log_weighted_sum(log_w, np.abs(Lu) ** 2, quad),
        log_lam + log_weighted_sum(log_w_sigma, dn2, quad_sigma * sigma_minus[None, :]),
    ])


def log_ratio(log_terms: np.ndarray) -> float:
    """log(LHS / RHS); -inf when the left side vanishes."""
    lhs = logsumexp(log_terms[:4])
    if lhs == -np.inf:
        return -np.inf
    rhs = logsumexp(log_terms[4:])
    return float(lhs - rhs) if rhs > -np.inf else np.inf


@dataclass
class CarlemanReport:
    """
    Per-lambda outcome of the boundary Carleman check on a test suite.

    For every lambda the suite member with the largest LHS/RHS ratio is
    reported. Terms are stored as ``exp(log_term - log_scale)`` with one
    ``log_scale`` per lambda so that every stored value is finite.

    The sweep passes when, from some lambda_0 before its last entry, no
    later ratio exceeds the ratio at lambda_0 by more than ``growth`` and
    the tail stays below ``constant``.
    """
    lambdas: list[float]
    log_terms: np.ndarray
    ratios: np.ndarray
    worst_member: list[int]
    growth: float = DEFAULT_TOLERANCES.carleman_growth
    constant: float = DEFAULT_TOLERANCES.carleman_constant
    log_scale: np.ndarray = field(init=False)
    terms: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        finite = np.where(np.isfinite(self.log_terms), self.log_terms, -np.inf)
        scale = np.max(finite, axis=1)
        self.log_scale = np.where(np.isfinite(scale), scale, 0.0)
        self.terms = np.exp(self.log_terms - self.log_scale[:, None])

    @property
    def C_hat(self) -> float:
        return float(np.max(self.ratios)) if len(self.ratios) else 0.0

    @property
    def onset_index(self) -> int:
        """Smallest sweep index whose ratio bounds every later one up to ``growth``."""
        ratios = np.asarray(self.ratios, dtype=float)
        for idx in range(len(ratios)):
            if np.max(ratios[idx:]) <= ratios[idx] * (1.0 + self.growth):
                return idx
        return max(len(ratios) - 1, 0)

    @property
    def onset_lambda(self) -> float:
        return float(self.lambdas[self.onset_index]) if self.lambdas else float("nan")

    @property
    def tail_bound(self) -> float:
        """Largest ratio from the onset on."""
        if not len(self.ratios):
            return float("nan")
        return float(np.max(np.asarray(self.ratios)[self.onset_index:]))

    @property
    def passed(self) -> bool:
        ratios = np.asarray(self.ratios, dtype=float)
        if len(ratios) < 2:
            return False
        if not (np.all(np.isfinite(ratios)) and np.all(ratios >= 0)
                and np.all(np.isfinite(self.terms)) and np.all(self.terms >= 0)):
            return False
        return self.onset_index < len(ratios) - 1 and self.tail_bound <= self.constant

    def to_rows(self) -> list[dict]:
        rows = []
        for i, lam in enumerate(self.lambdas):
            row = {"lambda": lam}
            row.update({name: float(v) for name, v in zip(TERM_NAMES, self.terms[i])})
            row["log_scale"] = float(self.log_scale[i])
            row["ratio"] = float(self.ratios[i])
            row["member"] = self.worst_member[i]
            rows.append(row)
        return rows

    def to_summary(self) -> dict:
        return {"onset_lambda": self.onset_lambda, "C_hat": self.C_hat, "tail_bound": self.tail_bound,
                "passed": self.passed}


def check_boundary_estimate(c: CoefficientPair, weight: CarlemanWeight, test_suite: Sequence[ScalarField],
                            lambdas: Sequence[float] | None = None,
                            tolerances: Tolerances = DEFAULT_TOLERANCES) -> CarlemanReport:
    """
    Evaluate both sides of the boundary Carleman estimate over a lambda sweep.

    Args:
        c: Coefficients of L.
        weight: Supplies omega (and lam when ``lambdas`` is omitted).
        test_suite: Test functions with u(0) = 0 and u = 0 on Sigma.
        lambdas: Increasing sweep of lam values.
        tolerances: Supplies the allowed tail growth and the constant bounding the tail.

    Returns:
        `CarlemanReport` with the worst member per lambda.

    Raises:
        PreconditionError: If a suite member violates the vanishing conditions.
    """
    lambdas = [weight.lam] if lambdas is None else [float(l) for l in lambdas]
    for u in test_suite:
        check_preconditions(u)
    log_terms = np.full((len(lambdas), len(TERM_NAMES)), -np.inf)
    ratios = np.zeros(len(lambdas))
    worst = [-1] * len(lambdas)
    for i, lam in enumerate(lambdas):
        w = CarlemanWeight(lam, weight.omega)
        best = -np.inf
        for m, u in enumerate(test_suite):
            terms = log_carleman_terms(c, w, u)
            lr = log_ratio(terms)
            if worst[i] < 0 or lr > best:
                best, worst[i] = lr, m
                log_terms[i] = terms
        ratios[i] = float(np.exp(best)) if best > -np.inf else 0.0
        logger.debug("Carleman lam=%g worst member=%d ratio=%.4g", lam, worst[i], ratios[i])
    return CarlemanReport(lambdas, log_terms, ratios, worst,
                          tolerances.carleman_growth, tolerances.carleman_constant)


def bump_suite(grid: SpaceTimeGrid, boundary_active: bool = False) -> list[ScalarField]:
    """
    Twelve deterministic test functions: 3 centers x 2 widths x 2 time profiles.

    The time profiles are the cutoff chi(t) and (t/T)^2. The default family
    is a tensor bump compactly supported in the box; the boundary-active
    family p(t) prod sin(pi x_i) g(x) has a nonzero normal derivative.
    """
    profiles = (time_cutoff(grid), (grid.times / grid.T) ** 2)
    suite = []
    for center in SUITE_CENTERS:
        ctr = (center,) + tuple(1.0 - center if a % 2 else center for a in range(1, grid.dim))
        for radius in SUITE_RADII:
            if boundary_active:
                r2 = sum((x - c0) ** 2 for x, c0 in zip(grid.coords, ctr))
                spatial = np.prod([np.sin(np.pi * x) for x in grid.coords], axis=0) * np.exp(-r2 / (2 * radius**2))
                spatial = np.where(grid.interior_mask, spatial, 0.0)
            else:
                spatial = tensor_bump(grid, ctr, radius)
            for profile in profiles:
                suite.append(ScalarField(grid, grid.broadcast_time(profile) * spatial[None]))
    return suite
