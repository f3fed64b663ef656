"""
Space-time grids, sampled fields and boundary bookkeeping on Q = (0,T) x [0,1]^n.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property, lru_cache
from typing import Callable, Sequence

import numpy as np

from src.utils import unit_vector


class AdmissibilityError(ValueError):
    """Convection field exceeds the admissible bound 1/(9R)."""


@dataclass(frozen=True)
class SpaceTimeGrid:
    """
    Uniform tensor grid of the cylinder Q = (0,T) x [0,1]^dim.

    Attributes:
        dim: Spatial dimension, 2 or 3.
        N: Nodes per spatial axis (both box faces included).
        M: Number of time steps.
        T: Time horizon.
        radius: Smallest R with closure(Q) inside the ball B(0,R) of R^(1+dim).
    """
    dim: int
    N: int
    M: int
    T: float = 1.0
    radius: float = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        if self.N < 8 or self.M < 8:
            raise ValueError(f"Need N >= 8 and M >= 8, got N={self.N}, M={self.M}")
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T}")
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "radius", self.farthest_corner_norm())

    def farthest_corner_norm(self) -> float:
        corners = itertools.product([0.0, self.T], *([[0.0, 1.0]] * self.dim))
        return float(max(np.linalg.norm(np.array(c)) for c in corners))

    @property
    def h(self) -> float:
        return 1.0 / (self.N - 1)

    @property
    def k(self) -> float:
        return self.T / self.M

    @property
    def admissible_bound(self) -> float:
        return 1.0 / (9.0 * self.radius)

    @property
    def spatial_shape(self) -> tuple[int, ...]:
        return (self.N,) * self.dim

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.M + 1,) + self.spatial_shape

    @cached_property
    def axis(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.N)

    @cached_property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.M + 1)

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        """Spatial node coordinates, one ``spatial_shape`` array per axis."""
        return tuple(np.meshgrid(*([self.axis] * self.dim), indexing="ij"))

    @cached_property
    def interior_mask(self) -> np.ndarray:
        mask = np.zeros(self.spatial_shape, dtype=bool)
        mask[(slice(1, -1),) * self.dim] = True
        return mask

    @cached_property
    def spatial_weights(self) -> np.ndarray:
        """Trapezoid weights on the spatial nodes."""
        w1 = np.full(self.N, self.h)
        w1[[0, -1]] *= 0.5
        w = w1
        for _ in range(self.dim - 1):
            w = np.multiply.outer(w, w1)
        return w

    @cached_property
    def time_weights(self) -> np.ndarray:
        w = np.full(self.M + 1, self.k)
        w[[0, -1]] *= 0.5
        return w

    @cached_property
    def weights(self) -> np.ndarray:
        """Trapezoid weights on the full space-time grid."""
        return np.multiply.outer(self.time_weights, self.spatial_weights)

    def broadcast_time(self, profile: np.ndarray) -> np.ndarray:
        """Reshape a length M+1 time profile to broadcast against field values."""
        return np.asarray(profile).reshape((self.M + 1,) + (1,) * self.dim)

    def dot_coords(self, omega: Sequence[float]) -> np.ndarray:
        """omega . x on the spatial nodes."""
        return sum(w * c for w, c in zip(omega, self.coords))


def _freeze(values: np.ndarray) -> np.ndarray:
    arr = np.array(values, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ScalarField:
    """
    Real or complex samples of a function on every node of a space-time grid.

    The value array is copied and made read-only on construction.
    """
    grid: SpaceTimeGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values)
        if values.dtype.kind not in "fc":
            values = values.astype(float)
        if values.shape != self.grid.shape:
            raise ValueError(f"Field shape {values.shape} does not match grid shape {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("Field contains non-finite values")
        object.__setattr__(self, "values", _freeze(values))

    @classmethod
    def zeros(cls, grid: SpaceTimeGrid, dtype=float) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape, dtype=dtype))

    @classmethod
    def from_function(cls, grid: SpaceTimeGrid, fn: Callable[..., np.ndarray]) -> "ScalarField":
        """
        Sample ``fn(t, x1, ..., xn)`` on the grid.

        The function receives broadcastable arrays and may return a scalar.
        """
        t = grid.broadcast_time(grid.times)
        values = fn(t, *(c[None, ...] for c in grid.coords))
        return cls(grid, np.broadcast_to(values, grid.shape))

    @classmethod
    def from_time_profile(cls, grid: SpaceTimeGrid, profile: np.ndarray) -> "ScalarField":
        return cls(grid, np.broadcast_to(grid.broadcast_time(profile), grid.shape))

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.values)

    def is_time_independent(self) -> bool:
        return bool(np.all(self.values == self.values[:1]))

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def l2_norm(self) -> float:
        """Trapezoid L2(Q) norm."""
        return float(np.sqrt(np.sum(self.grid.weights * np.abs(self.values) ** 2)))

    def inner(self, other: "ScalarField") -> complex:
        """Trapezoid L2(Q) pairing <self, other> (conjugate-linear in ``other``)."""
        self._check_grid(other)
        return complex(np.sum(self.grid.weights * self.values * np.conj(other.values)))

    def _check_grid(self, other) -> None:
        if other.grid != self.grid:
            raise ValueError("Fields live on different grids")

    def _wrap(self, values: np.ndarray) -> "ScalarField":
        return ScalarField(self.grid, values)

    def __add__(self, other):
        if isinstance(other, ScalarField):
            self._check_grid(other)
            return self._wrap(self.values + other.values)
        return self._wrap(self.values + other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, ScalarField):
            self._check_grid(other)
            return self._wrap(self.values - other.values)
        return self._wrap(self.values - other)

    def __neg__(self):
        return self._wrap(-self.values)

    def __mul__(self, other):
        if isinstance(other, ScalarField):
            self._check_grid(other)
            return self._wrap(self.values * other.values)
        return self._wrap(self.values * other)

    __rmul__ = __mul__

    def conj(self) -> "ScalarField":
        return self._wrap(np.conj(self.values))


@dataclass(frozen=True, eq=False)
class VectorField:
    """
    Vector field with one `ScalarField` per spatial axis.

    Attributes:
        components: The dim component fields, all on the same grid.
        time_independent: If True, every time slice is bit-identical.
    """
    components: tuple[ScalarField, ...]
    time_independent: bool = False

    def __post_init__(self) -> None:
        comps = tuple(self.components)
        if not comps:
            raise ValueError("VectorField needs at least one component")
        grid = comps[0].grid
        if len(comps) != grid.dim:
            raise ValueError(f"Expected {grid.dim} components, got {len(comps)}")
        if any(c.grid != grid for c in comps):
            raise ValueError("Components live on different grids")
        if self.time_independent and not all(c.is_time_independent() for c in comps):
            raise ValueError("time_independent field has differing time slices")
        object.__setattr__(self, "components", comps)

    @classmethod
    def from_arrays(cls, grid: SpaceTimeGrid, arrays: Sequence[np.ndarray],
                    time_independent: bool = False) -> "VectorField":
        return cls(tuple(ScalarField(grid, np.broadcast_to(a, grid.shape)) for a in arrays),
                   time_independent=time_independent)

    @classmethod
    def from_function(cls, grid: SpaceTimeGrid, fn: Callable[..., Sequence[np.ndarray]],
                      time_independent: bool = False) -> "VectorField":
        t = grid.broadcast_time(grid.times)
        arrays = fn(t, *(c[None, ...] for c in grid.coords))
        return cls.from_arrays(grid, arrays, time_independent=time_independent)

    @classmethod
    def zeros(cls, grid: SpaceTimeGrid) -> "VectorField":
        return cls.from_arrays(grid, [np.zeros(grid.shape)] * grid.dim, time_independent=True)

    @property
    def grid(self) -> SpaceTimeGrid:
        return self.components[0].grid

    @property
    def values(self) -> np.ndarray:
        """Stacked component values, shape (dim,) + grid.shape."""
        return np.stack([c.values for c in self.components])

    def pointwise_norm(self) -> np.ndarray:
        return np.sqrt(sum(np.abs(c.values) ** 2 for c in self.components))

    def sup_norm(self) -> float:
        return float(np.max(self.pointwise_norm()))

    def l2_norm(self) -> float:
        return float(np.sqrt(sum(c.l2_norm() ** 2 for c in self.components)))

    def is_admissible(self) -> bool:
        bound = self.grid.admissible_bound
        return self.sup_norm() <= bound * (1.0 + 1e-12)

    def check_admissible(self) -> None:
        """
        Raises:
            AdmissibilityError: If the sup-norm exceeds 1/(9R).
        """
        if not self.is_admissible():
            raise AdmissibilityError(
                f"|A|_inf = {self.sup_norm():.6g} exceeds the admissible bound "
                f"1/(9R) = {self.grid.admissible_bound:.6g}"
            )

    def dot(self, omega: Sequence[float]) -> ScalarField:
        """Pointwise omega . F."""
        return ScalarField(self.grid, sum(w * c.values for w, c in zip(omega, self.components)))

    def squared_norm(self) -> ScalarField:
        return ScalarField(self.grid, sum(c.values * c.values for c in self.components))

    def _check_grid(self, other: "VectorField") -> None:
        if other.grid != self.grid:
            raise ValueError("Fields live on different grids")

    def __add__(self, other: "VectorField") -> "VectorField":
        self._check_grid(other)
        return VectorField(tuple(a + b for a, b in zip(self.components, other.components)),
                           time_independent=self.time_independent and other.time_independent)

    def __sub__(self, other: "VectorField") -> "VectorField":
        self._check_grid(other)
        return VectorField(tuple(a - b for a, b in zip(self.components, other.components)),
                           time_independent=self.time_independent and other.time_independent)

    def __mul__(self, scalar: float) -> "VectorField":
        return VectorField(tuple(c * scalar for c in self.components),
                           time_independent=self.time_independent)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class BoundaryFaces:
    """
    Every (face, node) pair of the box boundary.

    Faces are numbered ``2*axis + side`` with side 0 at x_axis = 0 and side 1
    at x_axis = 1. Edge and corner nodes appear once per face they belong to,
    each time with that face's outward normal.
    """
    grid: SpaceTimeGrid
    face_ids: np.ndarray
    nodes: np.ndarray
    normals: np.ndarray
    weights: np.ndarray

    @property
    def count(self) -> int:
        return len(self.face_ids)

    @cached_property
    def coords(self) -> np.ndarray:
        return self.grid.axis[self.nodes]

    def gather(self, values: np.ndarray) -> np.ndarray:
        """Sample a (M+1,) + spatial array at every boundary pair -> (M+1, count)."""
        return values[(slice(None),) + tuple(self.nodes.T)]

    def face_slices(self):
        """Yield (face_id, axis, side, selector) in storage order."""
        for face_id in range(2 * self.grid.dim):
            axis, side = divmod(face_id, 2)
            yield face_id, axis, side, self.face_ids == face_id


@lru_cache(maxsize=16)
def boundary_faces(grid: SpaceTimeGrid) -> BoundaryFaces:
    """Build the boundary pair table of ``grid`` (cached per grid)."""
    n, N = grid.dim, grid.N
    w1 = np.full(N, grid.h)
    w1[[0, -1]] *= 0.5
    face_ids, nodes, normals, weights = [], [], [], []
    for axis in range(n):
        others = [a for a in range(n) if a != axis]
        rest = np.indices((N,) * (n - 1)).reshape(n - 1, -1).T
        w_face = np.ones(len(rest))
        for j in range(n - 1):
            w_face = w_face * w1[rest[:, j]]
        for side in (0, 1):
            idx = np.zeros((len(rest), n), dtype=int)
            idx[:, others] = rest
            idx[:, axis] = 0 if side == 0 else N - 1
            nu = np.zeros(n)
            nu[axis] = -1.0 if side == 0 else 1.0
            face_ids.append(np.full(len(rest), 2 * axis + side))
            nodes.append(idx)
            normals.append(np.tile(nu, (len(rest), 1)))
            weights.append(w_face)
    return BoundaryFaces(
        grid=grid,
        face_ids=_freeze(np.concatenate(face_ids)),
        nodes=_freeze(np.concatenate(nodes)),
        normals=_freeze(np.concatenate(normals)),
        weights=_freeze(np.concatenate(weights)),
    )


class RegionKind(str, Enum):
    FULL = "full"
    SHADOWED = "shadowed"
    ILLUMINATED = "illuminated"
    F = "F"
    G = "G"
    SIGMA_PLUS = "sigma_plus"
    SIGMA_MINUS = "sigma_minus"


@dataclass(frozen=True, eq=False)
class BoundaryRegion:
    """
    A subset of the (face, node) boundary pairs selected by normals.

    Membership rules, with nu the outward normal:
        shadowed      nu . omega0 >= 0
        illuminated   nu . omega0 <= 0
        F             nu . omega0 >= -2 eps   (neighbourhood of the shadowed face)
        G             nu . omega0 <= 2 eps    (neighbourhood of the illuminated face)
        sigma_plus    nu . omega  >  eps
        sigma_minus   nu . omega  < -eps
    With these choices the complement of G lies in sigma_plus for every
    |omega - omega0| <= eps.
    """
    kind: RegionKind
    omega0: tuple[float, ...]
    epsilon: float
    omega: tuple[float, ...]
    faces: BoundaryFaces
    mask: np.ndarray

    @classmethod
    def resolve(cls, grid: SpaceTimeGrid, kind: RegionKind | str, omega0: Sequence[float],
                epsilon: float = 0.0, omega: Sequence[float] | None = None) -> "BoundaryRegion":
        kind = RegionKind(kind)
        if epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        w0 = unit_vector(omega0)
        if len(w0) != grid.dim:
            raise ValueError("omega0 dimension does not match the grid")
        w = w0 if omega is None else unit_vector(omega)
        faces = boundary_faces(grid)
        d0 = faces.normals @ w0
        d = faces.normals @ w
        rules = {
            RegionKind.FULL: np.ones(faces.count, dtype=bool),
            RegionKind.SHADOWED: d0 >= 0,
            RegionKind.ILLUMINATED: d0 <= 0,
            RegionKind.F: d0 >= -2.0 * epsilon,
            RegionKind.G: d0 <= 2.0 * epsilon,
            RegionKind.SIGMA_PLUS: d > epsilon,
            RegionKind.SIGMA_MINUS: d < -epsilon,
        }
        return cls(kind, tuple(w0), float(epsilon), tuple(w), faces, _freeze(rules[kind]))

    @property
    def face_ids(self) -> list[int]:
        return sorted(set(int(f) for f in self.faces.face_ids[self.mask]))
