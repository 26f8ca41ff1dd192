"""Gradient Hoelder seminorm, positivity / dead-core classification and Hopf slopes."""

from __future__ import annotations

import itertools
import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from core.errors import GridError, InsufficientDataError
from core.models import PositivityReport
from lattice.grid import EXTERIOR, Grid, ScalarField, as_point, interpolate
from pde.operators import gradient_at

logger = logging.getLogger(__name__)

MIN_PAIRS = 100
PAIRS_PER_DECADE = 1000
LOCAL_REACH = 3

IDENTICALLY_ZERO = "identically-zero"
STRICTLY_POSITIVE = "strictly-positive"
MIXED = "mixed"


def _local_offsets(dim: int, reach: int) -> np.ndarray:
    """Lattice offsets with 0 < |k| <= reach, one of each +/- pair."""
    offsets = []
    for k in itertools.product(range(-reach, reach + 1), repeat=dim):
        if 0 < sum(c * c for c in k) <= reach * reach and k > tuple([0] * dim):
            offsets.append(k)
    return np.asarray(offsets, dtype=np.int64)


def _partners(grid: Grid, members: np.ndarray, offsets: np.ndarray, mask: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Flat indices (i, j) with j = i + offset inside the box and inside ``mask``."""
    base = np.stack(np.unravel_index(members, grid.extent), axis=1)
    target = base + offsets
    inside = np.all((target >= 0) & (target < np.asarray(grid.extent)), axis=1)
    partner = np.full(members.size, -1, dtype=np.int64)
    if np.any(inside):
        partner[inside] = np.ravel_multi_index(tuple(target[inside].T), grid.extent)
    keep = inside.copy()
    keep[inside] = mask[partner[inside]]
    return members[keep], partner[keep]


def holder_gradient_seminorm(
    u: ScalarField,
    alpha: float,
    subdomain: Tuple[Sequence[float], float],
    seed: int = 0,
    pairs_per_decade: int = PAIRS_PER_DECADE,
) -> float:
    """max |Du(x) - Du(y)| / |x - y|^alpha over node pairs in a ball.

    Offsets up to three lattice steps are enumerated exhaustively; longer
    distances are sampled per decade with a seeded generator.
    """
    grid = u.grid
    center, radius = subdomain
    center = as_point(center, grid.dim)
    members = grid.interior[grid.distances(center)[grid.interior] <= radius]
    if members.size < 2:
        raise InsufficientDataError(f"subdomain B_{radius} holds {members.size} Interior nodes")
    mask = np.zeros(grid.size, dtype=bool)
    mask[members] = True
    grads = np.zeros((grid.size, grid.dim))
    grads[members] = gradient_at(u.values, grid, members)
    h = grid.spacing

    ratios: List[np.ndarray] = []
    pair_count = 0
    for k in _local_offsets(grid.dim, LOCAL_REACH):
        i, j = _partners(grid, members, np.broadcast_to(k, (members.size, grid.dim)), mask)
        if i.size == 0:
            continue
        distance = h * math.sqrt(float(np.dot(k, k)))
        ratios.append(np.linalg.norm(grads[i] - grads[j], axis=1) / distance ** alpha)
        pair_count += i.size

    rng = np.random.default_rng(seed)
    low = h
    while low < 2.0 * radius:
        high = 10.0 * low
        attempts = 20 * pairs_per_decade
        first = rng.choice(members, size=attempts)
        lengths = np.exp(rng.uniform(math.log(low), math.log(high), size=attempts))
        directions = rng.normal(size=(attempts, grid.dim))
        directions /= np.maximum(np.linalg.norm(directions, axis=1), 1e-300)[:, None]
        steps = np.rint(directions * (lengths / h)[:, None]).astype(np.int64)
        i, j = _partners(grid, first, steps, mask)
        if i.size:
            distance = np.linalg.norm(grid.coords(i) - grid.coords(j), axis=1)
            in_decade = (distance >= low) & (distance < high)
            i, j, distance = i[in_decade][:pairs_per_decade], j[in_decade][:pairs_per_decade], distance[in_decade][:pairs_per_decade]
            if i.size:
                ratios.append(np.linalg.norm(grads[i] - grads[j], axis=1) / distance ** alpha)
                pair_count += i.size
        low = high

    if pair_count < MIN_PAIRS:
        raise InsufficientDataError(f"only {pair_count} node pairs in the subdomain, need {MIN_PAIRS}")
    value = float(np.max(np.concatenate(ratios)))
    logger.debug("hoelder seminorm alpha=%g over %d pairs: %.6g", alpha, pair_count, value)
    return value


def ball_node_count(grid: Grid, x0, r: float) -> int:
    """Interior nodes of the closed ball B_r(x0)."""
    dist = grid.distances(x0)[grid.interior]
    return int(np.count_nonzero(dist <= r * (1.0 + 1e-12)))


def positivity_report(u: ScalarField, tol: float) -> PositivityReport:
    """Classify u as identically zero, strictly positive or mixed over the Interior nodes."""
    grid = u.grid
    interior = u.values[grid.interior]
    sup_abs = float(np.max(np.abs(interior))) if interior.size else 0.0
    min_interior = float(np.min(interior)) if interior.size else 0.0

    if sup_abs <= tol:
        dead = [int(n) for n in grid.interior]
        return PositivityReport(IDENTICALLY_ZERO, tol, min_interior, sup_abs, dead_core=dead)
    if min_interior > tol:
        return PositivityReport(STRICTLY_POSITIVE, tol, min_interior, sup_abs)

    dead = grid.interior[interior <= tol]
    return PositivityReport(
        classification=MIXED,
        tol=tol,
        min_interior=min_interior,
        sup_abs=sup_abs,
        dead_core=[int(n) for n in dead],
        free_boundary_cells=_sign_change_cells(u, tol),
    )


def _sign_change_cells(u: ScalarField, tol: float) -> List[Tuple[int, ...]]:
    """Lattice cells whose corners are all non-Exterior and straddle the level tol."""
    grid = u.grid
    values = u.values.reshape(grid.extent)
    usable = (grid.classes != EXTERIOR).reshape(grid.extent)
    cell_shape = tuple(e - 1 for e in grid.extent)
    low = np.full(cell_shape, np.inf)
    high = np.full(cell_shape, -np.inf)
    all_usable = np.ones(cell_shape, dtype=bool)
    for corner in itertools.product((0, 1), repeat=grid.dim):
        window = tuple(slice(c, c + n) for c, n in zip(corner, cell_shape))
        low = np.minimum(low, values[window])
        high = np.maximum(high, values[window])
        all_usable &= usable[window]
    cells = np.argwhere(all_usable & (low <= tol) & (high > tol))
    return [tuple(int(i) for i in cell) for cell in cells]


def hopf_slope(
    u: ScalarField,
    z,
    x0,
    r: float,
    samples: int = 16,
    depth: Optional[float] = None,
) -> float:
    """min over points on the segment from z towards x0 of u(x) / (r - |x - x0|).

    ``depth`` limits how far the segment reaches into the ball; by default it
    stops one sample short of x0.
    """
    dim = u.grid.dim
    z = as_point(z, dim)
    x0 = as_point(x0, dim)
    span = float(np.linalg.norm(x0 - z))
    if span == 0.0 or not r > 0:
        raise GridError("degenerate Hopf segment: z coincides with x0 or r <= 0")
    if samples < 8:
        raise GridError(f"need at least 8 segment samples, got {samples}")
    reach = r * samples / (samples + 1.0) if depth is None else float(depth)
    if not 0 < reach < r:
        raise GridError(f"segment depth must lie in (0, r), got {reach}")
    direction = (x0 - z) / span
    t = reach * np.arange(1, samples + 1) / samples
    points = z + t[:, None] * direction
    values = interpolate(u, points)
    gaps = r - np.linalg.norm(points - x0, axis=1)
    if np.any(gaps <= 0.0):
        raise GridError(f"Hopf segment leaves the open ball B_{r}(x0): start z lies on or outside its sphere")
    return float(np.min(values / gaps))
