"""Uniform Cartesian lattice over a ball, node classification and fields.

Nodes are stored flat in row-major order. A node is Interior when its whole
3^n stencil lies in the closed ball, Boundary when it is not Interior but lies
within h*sqrt(n) of the sphere, and Exterior otherwise.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from core.errors import FieldError, GridError, NonFiniteError

logger = logging.getLogger(__name__)

EXTERIOR = 0
BOUNDARY = 1
INTERIOR = 2

CLASS_NAMES = {EXTERIOR: "Exterior", BOUNDARY: "Boundary", INTERIOR: "Interior"}

# Relative slack when comparing lattice distances against radii.
_RADIUS_SLACK = 1e-12

PointLike = Union[float, Sequence[float], np.ndarray]


@dataclass(frozen=True)
class BallDomain:
    center: Tuple[float, ...]
    radius: float


class Grid:
    """Lattice with per-node classification against a ball domain."""

    def __init__(
        self,
        dim: int,
        spacing: float,
        origin: Sequence[float],
        extent: Sequence[int],
        domain: BallDomain,
    ) -> None:
        self.dim = int(dim)
        self.spacing = float(spacing)
        self.origin = np.asarray(origin, dtype=float).reshape(self.dim)
        self.extent = tuple(int(e) for e in extent)
        self.domain = domain
        self.size = int(np.prod(self.extent))
        self.strides = tuple(int(np.prod(self.extent[axis + 1:])) for axis in range(self.dim))
        self.center = np.asarray(domain.center, dtype=float)

        if any(e < 3 for e in self.extent):
            raise GridError(f"extent must be >= 3 per axis, got {self.extent}")

        self._coords = self._build_coords()
        self.classes = self._classify()
        self.classes.setflags(write=False)
        self.interior = np.flatnonzero(self.classes == INTERIOR)
        self.boundary = np.flatnonzero(self.classes == BOUNDARY)
        self.non_exterior = np.flatnonzero(self.classes != EXTERIOR)
        if self.interior.size == 0:
            raise GridError("grid has no Interior nodes")

    @property
    def h(self) -> float:
        return self.spacing

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.extent

    @property
    def axes(self) -> Tuple[np.ndarray, ...]:
        return tuple(self.origin[a] + self.spacing * np.arange(self.extent[a]) for a in range(self.dim))

    def coords(self, nodes: Optional[np.ndarray] = None) -> np.ndarray:
        """Return node coordinates as an (N, dim) array."""
        if nodes is None:
            return self._coords
        return self._coords[np.asarray(nodes, dtype=np.int64)]

    def multi_index(self, node: int) -> Tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(int(node), self.extent))

    def flat_index(self, index: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(int(i) for i in index), self.extent))

    def classification(self, node: int) -> str:
        return CLASS_NAMES[int(self.classes[int(node)])]

    def is_interior(self, node: int) -> bool:
        return 0 <= int(node) < self.size and self.classes[int(node)] == INTERIOR

    def nearest_node(self, point: PointLike) -> int:
        point = as_point(point, self.dim)
        index = np.rint((point - self.origin) / self.spacing).astype(int)
        index = np.clip(index, 0, np.asarray(self.extent) - 1)
        return self.flat_index(index)

    def distances(self, x0: PointLike) -> np.ndarray:
        x0 = as_point(x0, self.dim)
        return np.linalg.norm(self._coords - x0, axis=1)

    def stencil_offsets(self) -> np.ndarray:
        """Flat offsets of the full 3^n block around a node (center excluded)."""
        offsets = []
        for shift in itertools.product((-1, 0, 1), repeat=self.dim):
            if any(shift):
                offsets.append(sum(s * stride for s, stride in zip(shift, self.strides)))
        return np.asarray(offsets, dtype=np.int64)

    def project_to_sphere(self, points: np.ndarray) -> np.ndarray:
        """Radially project points onto |x - c| = R (the center maps to c + R e1)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        delta = points - self.center
        norm = np.linalg.norm(delta, axis=1)
        direction = np.zeros_like(delta)
        direction[:, 0] = 1.0
        moved = norm > 0
        direction[moved] = delta[moved] / norm[moved, None]
        return self.center + self.domain.radius * direction

    def same_as(self, other: "Grid") -> bool:
        return (
            other is self
            or (
                self.dim == other.dim
                and self.spacing == other.spacing
                and self.extent == other.extent
                and np.array_equal(self.origin, other.origin)
                and self.domain == other.domain
            )
        )

    def metadata(self) -> dict:
        return {
            "dim": self.dim,
            "h": self.spacing,
            "origin": [float(v) for v in self.origin],
            "extent": list(self.extent),
            "center": [float(v) for v in self.center],
            "radius": float(self.domain.radius),
        }

    def _build_coords(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)

    def _classify(self) -> np.ndarray:
        radius = self.domain.radius
        dist = np.linalg.norm(self._coords - self.center, axis=1)
        inside = (dist <= radius * (1.0 + _RADIUS_SLACK)).reshape(self.extent)

        padded = np.pad(inside, 1, constant_values=False)
        interior = np.ones(self.extent, dtype=bool)
        for shift in itertools.product((-1, 0, 1), repeat=self.dim):
            window = tuple(slice(1 + s, 1 + s + n) for s, n in zip(shift, self.extent))
            interior &= padded[window]

        classes = np.full(self.size, EXTERIOR, dtype=np.int8)
        band = np.abs(dist - radius) <= self.spacing * math.sqrt(self.dim)
        classes[band] = BOUNDARY
        classes[interior.reshape(-1)] = INTERIOR
        return classes


def as_point(point: PointLike, dim: int) -> np.ndarray:
    arr = np.asarray(point, dtype=float).reshape(-1)
    if arr.size == 1 and dim > 1:
        arr = np.full(dim, float(arr[0]))
    if arr.size != dim:
        raise GridError(f"point {list(arr)} does not have dimension {dim}")
    return arr


def build_grid(dim: int, h: float, center: PointLike, R: float) -> Grid:
    """Build the center-aligned lattice covering the closed ball B_R(center).

    Args:
        dim: Spatial dimension (>= 1)
        h: Lattice spacing, must satisfy h < R/4
        center: Ball center (a scalar is broadcast to every axis)
        R: Ball radius

    Returns:
        Classified grid
    """
    if int(dim) < 1:
        raise GridError(f"dim must be >= 1, got {dim}")
    if not (h > 0 and R > 0):
        raise GridError(f"h and R must be positive, got h={h}, R={R}")
    if h >= R / 4:
        raise GridError(f"h={h} must be smaller than R/4={R / 4}")
    dim = int(dim)
    center_arr = as_point(center, dim)
    half = int(math.ceil(R / h)) + 1
    origin = center_arr - half * h
    extent = [2 * half + 1] * dim
    grid = Grid(dim, h, origin, extent, BallDomain(tuple(float(c) for c in center_arr), float(R)))
    logger.debug(
        "grid dim=%d h=%g nodes=%d interior=%d boundary=%d",
        dim, h, grid.size, grid.interior.size, grid.boundary.size,
    )
    return grid


class ScalarField:
    """One finite real per node. Values are read-only once built."""

    def __init__(self, grid: Grid, values: np.ndarray, tag: str = "") -> None:
        values = np.array(values, dtype=float).reshape(-1)
        if values.shape != (grid.size,):
            raise FieldError(f"expected {grid.size} values, got {values.size}")
        _require_finite(values, grid, tag)
        values.setflags(write=False)
        self.grid = grid
        self.values = values
        self.tag = tag

    def with_values(self, values: np.ndarray, tag: Optional[str] = None) -> "ScalarField":
        return ScalarField(self.grid, values, self.tag if tag is None else tag)

    def sup_norm(self, nodes: Optional[np.ndarray] = None) -> float:
        vals = self.values if nodes is None else self.values[nodes]
        return float(np.max(np.abs(vals))) if vals.size else 0.0

    def __repr__(self) -> str:
        return f"ScalarField(tag={self.tag!r}, nodes={self.grid.size})"


class VectorField:
    """One finite n-vector per node."""

    def __init__(self, grid: Grid, values: np.ndarray, tag: str = "") -> None:
        values = np.array(values, dtype=float)
        if values.ndim == 1 and values.size == grid.dim:
            values = np.broadcast_to(values, (grid.size, grid.dim)).copy()
        if values.shape != (grid.size, grid.dim):
            raise FieldError(f"expected shape {(grid.size, grid.dim)}, got {values.shape}")
        _require_finite(values, grid, tag)
        values.setflags(write=False)
        self.grid = grid
        self.values = values
        self.tag = tag

    def sup_norm(self) -> float:
        return float(np.max(np.linalg.norm(self.values, axis=1))) if self.values.size else 0.0


def constant_field(grid: Grid, value: float, tag: str = "") -> ScalarField:
    return ScalarField(grid, np.full(grid.size, float(value)), tag or f"const:{value}")


def zero_vector(grid: Grid, tag: str = "zero") -> VectorField:
    return VectorField(grid, np.zeros((grid.size, grid.dim)), tag)


def sample(fn: Callable[[np.ndarray], np.ndarray], grid: Grid, tag: str = "") -> ScalarField:
    """Evaluate fn at every node.

    fn receives the (N, dim) coordinate array and returns N values or a
    scalar, which is broadcast.
    """
    values = np.asarray(fn(grid.coords()), dtype=float)
    if values.ndim == 0:
        values = np.full(grid.size, float(values))
    return ScalarField(grid, values.reshape(-1), tag)


def sample_vector(fn: Callable[[np.ndarray], np.ndarray], grid: Grid, tag: str = "") -> VectorField:
    values = np.asarray(fn(grid.coords()), dtype=float)
    if values.ndim <= 1 and values.size in (1, grid.dim):
        values = np.broadcast_to(values.reshape(-1) * np.ones(grid.dim), (grid.size, grid.dim))
    return VectorField(grid, values, tag)


def sup_over_ball(u: ScalarField, x0: PointLike, r: float) -> float:
    return argsup_over_ball(u, x0, r)[0]


def argsup_over_ball(u: ScalarField, x0: PointLike, r: float) -> Tuple[float, int]:
    """Maximum over non-Exterior nodes with |x - x0| <= r, and the node attaining it."""
    grid = u.grid
    nodes = grid.non_exterior
    dist = grid.distances(x0)[nodes]
    mask = dist <= r * (1.0 + _RADIUS_SLACK)
    if not np.any(mask):
        raise GridError(f"ball B_{r}({list(as_point(x0, grid.dim))}) contains no nodes")
    return _masked_argmax(u.values, nodes[mask])


def sup_over_sphere(u: ScalarField, x0: PointLike, r: float) -> float:
    return argsup_over_sphere(u, x0, r)[0]


def argsup_over_sphere(u: ScalarField, x0: PointLike, r: float) -> Tuple[float, int]:
    """Maximum over the shell r - h*sqrt(n) <= |x - x0| <= r + h*sqrt(n)."""
    grid = u.grid
    nodes = grid.non_exterior
    dist = grid.distances(x0)[nodes]
    width = grid.spacing * math.sqrt(grid.dim)
    mask = np.abs(dist - r) <= width * (1.0 + _RADIUS_SLACK)
    if not np.any(mask):
        raise GridError(f"shell of radius {r} around {list(as_point(x0, grid.dim))} contains no nodes")
    return _masked_argmax(u.values, nodes[mask])


def interpolate(u: ScalarField, points: np.ndarray) -> np.ndarray:
    """Multilinear interpolation of u at arbitrary points inside the bounding box."""
    grid = u.grid
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != grid.dim:
        raise GridError(f"points must have {grid.dim} columns")
    interpolator = RegularGridInterpolator(
        grid.axes, u.values.reshape(grid.extent), method="linear", bounds_error=False, fill_value=None
    )
    lower = grid.origin
    upper = grid.origin + grid.spacing * (np.asarray(grid.extent) - 1)
    if np.any(points < lower - 1e-12) or np.any(points > upper + 1e-12):
        raise GridError("interpolation point outside the bounding box")
    return np.asarray(interpolator(points), dtype=float)


def boundary_values(grid: Grid, g: Callable[[np.ndarray], np.ndarray], mode: str = "projection") -> np.ndarray:
    """Dirichlet values for the Boundary nodes.

    ``projection`` evaluates g at the radial projection onto the sphere,
    ``nodal`` evaluates it at the node itself.
    """
    points = grid.coords(grid.boundary)
    if mode == "projection":
        points = grid.project_to_sphere(points)
    elif mode != "nodal":
        raise GridError(f"unknown boundary evaluation mode {mode!r}")
    values = np.asarray(g(points), dtype=float)
    if values.ndim == 0:
        values = np.full(grid.boundary.size, float(values))
    values = values.reshape(-1)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        node = int(grid.boundary[bad[0]])
        raise NonFiniteError(
            f"boundary datum is not finite at node {node} {list(grid.coords([node])[0])}",
            node=node,
            coords=grid.coords([node])[0],
        )
    return values


def _masked_argmax(values: np.ndarray, nodes: np.ndarray) -> Tuple[float, int]:
    local = int(np.argmax(values[nodes]))
    node = int(nodes[local])
    return float(values[node]), node


def _require_finite(values: np.ndarray, grid: Grid, tag: str) -> None:
    finite = np.isfinite(values)
    if finite.all():
        return
    flat = finite.reshape(grid.size, -1).all(axis=1)
    node = int(np.flatnonzero(~flat)[0])
    coords = grid.coords([node])[0]
    raise NonFiniteError(
        f"field {tag or '<untagged>'} is not finite at node {node} {[float(c) for c in coords]}",
        node=node,
        coords=coords,
    )
