"""
Forward and adjoint solves of the convection-diffusion IBVP and its DN output.

The equation is stepped in the expanded form

    d_t u = Lap u + 2 A . grad u + (div A + |A|^2 - q) u + s

with Crank-Nicolson in time, Dirichlet rows on the box faces and one sparse
LU factorization per distinct time-level matrix.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from src.grid import (BoundaryFaces, BoundaryRegion, ScalarField, SpaceTimeGrid, VectorField,
                      boundary_faces)
from src.operators import (boundary_integral, divergence, gradient_matrices, gradient_values,
                           laplacian_matrix, laplacian_values, normal_derivative_values,
                           time_derivative_values)
from src.utils import DEFAULT_TOLERANCES

logger = logging.getLogger(__name__)

Direction = Literal["forward", "adjoint"]


class CompatibilityError(ValueError):
    """Dirichlet data does not vanish at the initial (or terminal) time."""


class SolverError(RuntimeError):
    """Sparse factorization failed or a step missed the residual contract."""


@dataclass(frozen=True, eq=False)
class CoefficientPair:
    """
    Admissible convection term A with density q and the derived potentials.

    Attributes:
        A: Convection field, checked against 1/(9R) on construction.
        q: Density coefficient (real or complex).
        div_A: Discrete divergence of A.
        q_tilde: q - div A - |A|^2.
        q_tilde_star: conj(q) + div A - |A|^2.
    """
    A: VectorField
    q: ScalarField
    div_A: ScalarField = field(init=False)
    q_tilde: ScalarField = field(init=False)
    q_tilde_star: ScalarField = field(init=False)

    def __post_init__(self) -> None:
        if self.A.grid != self.q.grid:
            raise ValueError("A and q live on different grids")
        self.A.check_admissible()
        div_A = divergence(self.A)
        object.__setattr__(self, "div_A", div_A)
        object.__setattr__(self, "q_tilde", self.recompute_q_tilde())
        abs_A2 = self.A.squared_norm().values
        object.__setattr__(self, "q_tilde_star",
                           ScalarField(self.grid, np.conj(self.q.values) + div_A.values - abs_A2))

    @classmethod
    def zero(cls, grid: SpaceTimeGrid) -> "CoefficientPair":
        return cls(VectorField.zeros(grid), ScalarField.zeros(grid))

    @property
    def grid(self) -> SpaceTimeGrid:
        return self.q.grid

    def recompute_q_tilde(self) -> ScalarField:
        div_A = divergence(self.A).values
        return ScalarField(self.grid, self.q.values - div_A - self.A.squared_norm().values)

    def is_time_independent(self) -> bool:
        return self.A.time_independent and self.q.is_time_independent()


@dataclass(frozen=True, eq=False)
class BoundaryTrace:
    """
    Values on (time step, boundary pair), optionally restricted to a region.

    Values outside the region mask are stored as zero.
    """
    grid: SpaceTimeGrid
    values: np.ndarray
    region: BoundaryRegion | None = None

    def __post_init__(self) -> None:
        faces = boundary_faces(self.grid)
        values = np.asarray(self.values)
        if values.shape != (self.grid.M + 1, faces.count):
            raise ValueError(f"Trace shape {values.shape} does not match (M+1, {faces.count})")
        values = np.where(self.mask[None, :], values, 0.0)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def faces(self) -> BoundaryFaces:
        return boundary_faces(self.grid)

    @property
    def mask(self) -> np.ndarray:
        if self.region is None:
            return np.ones(boundary_faces(self.grid).count, dtype=bool)
        return self.region.mask

    @property
    def tag(self) -> str:
        return "full" if self.region is None else self.region.kind.value

    @classmethod
    def zeros(cls, grid: SpaceTimeGrid) -> "BoundaryTrace":
        return cls(grid, np.zeros((grid.M + 1, boundary_faces(grid).count)))

    @classmethod
    def from_field(cls, f: ScalarField) -> "BoundaryTrace":
        return cls(f.grid, boundary_faces(f.grid).gather(f.values))

    @classmethod
    def from_function(cls, grid: SpaceTimeGrid, fn: Callable[..., np.ndarray]) -> "BoundaryTrace":
        """Sample ``fn(t, x1, ..., xn)`` on every boundary pair."""
        faces = boundary_faces(grid)
        t = grid.times[:, None]
        x = [faces.coords[None, :, a] for a in range(grid.dim)]
        return cls(grid, np.broadcast_to(fn(t, *x), (grid.M + 1, faces.count)))

    def restrict(self, region: BoundaryRegion) -> "BoundaryTrace":
        if self.region is not None:
            region = BoundaryRegion(region.kind, region.omega0, region.epsilon, region.omega,
                                    region.faces, region.mask & self.region.mask)
        return BoundaryTrace(self.grid, self.values, region)

    def to_nodes(self) -> np.ndarray:
        """Scatter pair values onto the boundary nodes of a ``grid.shape`` array."""
        faces = self.faces
        out = np.zeros(self.grid.shape, dtype=self.values.dtype)
        out[(slice(None),) + tuple(faces.nodes.T)] = self.values
        return out

    def l2_norm(self) -> float:
        """Trapezoid L2 norm over the region part of Sigma."""
        return float(np.sqrt(abs(boundary_integral(np.abs(self.values) ** 2, self.faces, self.mask))))

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def __sub__(self, other: "BoundaryTrace") -> "BoundaryTrace":
        return BoundaryTrace(self.grid, self.values - other.values, self.region)

    def to_rows(self) -> list[dict]:
        """Rows ``t, face_id, x1..xn, value`` for CSV export (region pairs only)."""
        faces = self.faces
        rows = []
        idx = np.flatnonzero(self.mask)
        for n, t in enumerate(self.grid.times):
            for j in idx:
                row = {"t": float(t), "face_id": int(faces.face_ids[j])}
                for a in range(self.grid.dim):
                    row[f"x{a + 1}"] = float(faces.coords[j, a])
                value = self.values[n, j]
                row["value"] = float(np.real(value))
                if np.iscomplexobj(self.values):
                    row["value_imag"] = float(np.imag(value))
                rows.append(row)
        return rows


def _is_time_constant(arr: np.ndarray | None, time_axis: int) -> bool:
    if arr is None:
        return True
    first = np.take(arr, [0], axis=time_axis)
    return bool(np.all(arr == first))


def spatial_operator(grid: SpaceTimeGrid, drift_n: np.ndarray | None, reaction_n: np.ndarray | None) -> sp.csr_matrix:
    """Sparse Lap + b . grad + c at one time level."""
    S = laplacian_matrix(grid)
    if drift_n is not None:
        for b, G in zip(drift_n, gradient_matrices(grid)):
            S = S + sp.diags(b.ravel()) @ G
    if reaction_n is not None:
        S = S + sp.diags(reaction_n.ravel())
    return S.tocsr()


def apply_spatial(values: np.ndarray, grid: SpaceTimeGrid, drift: np.ndarray | None,
                  reaction: np.ndarray | None) -> np.ndarray:
    """(Lap + b . grad + c) applied to every time slice of a ``grid.shape`` array."""
    out = laplacian_values(values, grid)
    if drift is not None:
        for b, g in zip(drift, gradient_values(values, grid)):
            out = out + b * g
    if reaction is not None:
        out = out + reaction * values
    return out


class _Factorization:
    """splu of (I - k/2 S) with identity rows on the boundary nodes."""

    def __init__(self, grid: SpaceTimeGrid, S: sp.csr_matrix, context: str):
        n_nodes = S.shape[0]
        interior = grid.interior_mask.ravel().astype(float)
        eye = sp.identity(n_nodes, format="csr")
        self.matrix = (sp.diags(interior) @ (eye - 0.5 * grid.k * S) + sp.diags(1.0 - interior)).tocsc()
        self.is_complex = np.iscomplexobj(self.matrix.data)
        try:
            self.lu = splu(self.matrix)
        except RuntimeError as exc:
            raise SolverError(f"Factorization failed ({context}, N={grid.N}, M={grid.M})") from exc

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if np.iscomplexobj(rhs) and not self.is_complex:
            return self.lu.solve(np.ascontiguousarray(rhs.real)) + 1j * self.lu.solve(np.ascontiguousarray(rhs.imag))
        return self.lu.solve(rhs.astype(self.matrix.dtype) if not np.iscomplexobj(rhs) else rhs)


def crank_nicolson(grid: SpaceTimeGrid, drift: np.ndarray | None = None, reaction: np.ndarray | None = None,
                   boundary: np.ndarray | None = None, source: np.ndarray | None = None,
                   source_half: np.ndarray | None = None, context: str = "",
                   residual_tol: float = DEFAULT_TOLERANCES.solver_residual) -> np.ndarray:
    """
    March W_t = Lap W + b . grad W + c W + s from W(0) = 0.

    Args:
        grid: Space-time grid.
        drift: b, shape (dim,) + grid.shape, or None.
        reaction: c, shape grid.shape, or None.
        boundary: Dirichlet values, shape grid.shape (only face nodes are read).
        source: Nodal source, averaged over each step.
        source_half: Source already evaluated at the M half steps.
        context: Label carried into solver errors (e.g. the lambda in use).
        residual_tol: Relative residual contract of every linear solve.

    Returns:
        Array of shape ``grid.shape``.

    Raises:
        SolverError: If a factorization fails or a step misses the residual contract.
    """
    n_nodes = grid.N ** grid.dim
    interior = grid.interior_mask.ravel()
    pieces = [a for a in (drift, reaction, boundary, source, source_half) if a is not None]
    dtype = complex if any(np.iscomplexobj(a) for a in pieces) else float
    W = np.zeros((grid.M + 1, n_nodes), dtype=dtype)

    constant = _is_time_constant(drift, 1) and _is_time_constant(reaction, 0)
    logger.debug("Crank-Nicolson: N=%d M=%d dim=%d constant=%s %s", grid.N, grid.M, grid.dim, constant, context)

    def level(n: int) -> sp.csr_matrix:
        return spatial_operator(grid, None if drift is None else drift[:, n],
                                None if reaction is None else reaction[n])

    S_prev = level(0)
    fact = _Factorization(grid, S_prev, context) if constant else None
    for n in range(grid.M):
        S_next = S_prev if constant else level(n + 1)
        if not constant:
            fact = _Factorization(grid, S_next, context)
        rhs = W[n] + 0.5 * grid.k * (S_prev @ W[n])
        if source is not None:
            rhs = rhs + 0.5 * grid.k * (source[n] + source[n + 1]).ravel()
        if source_half is not None:
            rhs = rhs + grid.k * source_half[n].ravel()
        rhs = np.where(interior, rhs, 0.0 if boundary is None else boundary[n + 1].ravel())
        W[n + 1] = fact.solve(rhs)
        residual = np.linalg.norm(fact.matrix @ W[n + 1] - rhs)
        scale = np.linalg.norm(rhs)
        if residual > residual_tol * max(scale, np.finfo(float).tiny):
            raise SolverError(
                f"Residual {residual:.3e} exceeds {residual_tol:g} x |rhs| at step {n + 1} "
                f"({context}, N={grid.N}, M={grid.M})"
            )
        S_prev = S_next
    return W.reshape(grid.shape)


def cn_defect(grid: SpaceTimeGrid, W: np.ndarray, drift: np.ndarray | None = None,
              reaction: np.ndarray | None = None) -> np.ndarray:
    """
    Crank-Nicolson defect (W^{n+1}-W^n)/k - (S^{n+1} W^{n+1} + S^n W^n)/2 on interior nodes.

    Returns:
        Array of shape (M,) + spatial shape, zero on the box faces.
    """
    SW = apply_spatial(W, grid, drift, reaction)
    defect = (W[1:] - W[:-1]) / grid.k - 0.5 * (SW[1:] + SW[:-1])
    return np.where(grid.interior_mask[None], defect, 0.0)


def reverse_time(values: np.ndarray, time_axis: int = 0) -> np.ndarray:
    return np.flip(values, axis=time_axis)


def _check_compatibility(f: BoundaryTrace, index: int, label: str) -> None:
    scale = max(1.0, f.sup_norm())
    mismatch = float(np.max(np.abs(f.values[index]))) if f.values.size else 0.0
    if mismatch > DEFAULT_TOLERANCES.zero_solution * scale:
        raise CompatibilityError(f"Boundary data must vanish at {label} (max |f| = {mismatch:.3e})")


def solve_ibvp(c: CoefficientPair, f: BoundaryTrace, source: ScalarField | None = None,
               direction: Direction = "forward") -> ScalarField:
    """
    Solve L u = source (forward) or L* v = source (adjoint) with Dirichlet data f.

    The forward problem starts from u(0) = 0; the adjoint problem ends at
    v(T) = 0 and is marched backward through t -> T - t.

    Args:
        c: Admissible coefficients.
        f: Dirichlet data on the full boundary.
        source: Optional right-hand side (manufactured solutions only).
        direction: ``"forward"`` or ``"adjoint"``.

    Returns:
        The space-time solution.

    Raises:
        CompatibilityError: If f does not vanish at t=0 (forward) or t=T (adjoint).
        AdmissibilityError: If A leaves the admissible set.
        SolverError: If a linear solve fails.
    """
    if direction not in ("forward", "adjoint"):
        raise ValueError(f"direction must be 'forward' or 'adjoint', got {direction!r}")
    if f.grid != c.grid:
        raise ValueError("Boundary data and coefficients live on different grids")
    c.A.check_admissible()
    grid = c.grid
    A = c.A.values
    boundary = f.to_nodes()
    src = None if source is None else source.values
    if direction == "forward":
        _check_compatibility(f, 0, "t = 0")
        W = crank_nicolson(grid, drift=2.0 * A, reaction=-c.q_tilde.values, boundary=boundary,
                           source=src, context="forward")
        return ScalarField(grid, W)
    _check_compatibility(f, -1, "t = T")
    W = crank_nicolson(grid, drift=reverse_time(-2.0 * A, 1), reaction=reverse_time(-c.q_tilde_star.values),
                       boundary=reverse_time(boundary), source=None if src is None else reverse_time(src),
                       context="adjoint")
    return ScalarField(grid, reverse_time(W))


def apply_operator(c: CoefficientPair, u: ScalarField, adjoint: bool = False) -> ScalarField:
    """
    L u = d_t u - Lap u - 2A . grad u + q~ u, or
    L* v = -d_t v - Lap v + 2A . grad v + q~* v with ``adjoint=True``.
    """
    grid = c.grid
    dt = time_derivative_values(u.values, grid)
    sign = -1.0 if adjoint else 1.0
    potential = c.q_tilde_star.values if adjoint else c.q_tilde.values
    values = (-dt if adjoint else dt) - apply_spatial(u.values, grid, sign * 2.0 * c.A.values, -potential)
    return ScalarField(grid, values)


def normal_derivative(u: ScalarField) -> BoundaryTrace:
    return BoundaryTrace(u.grid, normal_derivative_values(u.values, boundary_faces(u.grid)))


def dn_output(c: CoefficientPair, u: ScalarField) -> BoundaryTrace:
    """
    N u = d_nu u + 2 (nu . A) u on every boundary pair.

    Restrict the result with `BoundaryTrace.restrict` for partial data.
    """
    faces = boundary_faces(c.grid)
    nu_A = sum(faces.normals[None, :, a] * faces.gather(comp.values) for a, comp in enumerate(c.A.components))
    dn = normal_derivative_values(u.values, faces)
    return BoundaryTrace(c.grid, dn + 2.0 * nu_A * faces.gather(u.values))


def dn_difference_on_G(c1: CoefficientPair, c2: CoefficientPair, f: BoundaryTrace,
                       G: BoundaryRegion) -> BoundaryTrace:
    """
    Partial DN data (N_1 u_1 - N_2 u_2) restricted to the region G.

    Raises:
        ValueError: If the coefficient pairs live on different grids.
    """
    if c1.grid != c2.grid:
        raise ValueError("Coefficient pairs live on different grids")
    u1 = solve_ibvp(c1, f)
    u2 = solve_ibvp(c2, f)
    logger.debug("DN difference on %s (eps=%g)", G.kind.value, G.epsilon)
    return (dn_output(c1, u1) - dn_output(c2, u2)).restrict(G)
