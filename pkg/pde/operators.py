"""Discrete operators for |Du|^theta (Delta_p^N u + <B, Du>) + rho |Du|^sigma = f.

Everything here is vectorised over node batches: per-node helpers
(``gradient``, ``hessian``) wrap the batch kernels for a single node.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple, Union

import numpy as np

from core.errors import FieldError, GridError, ProblemSpecError
from lattice.grid import Grid, ScalarField, VectorField

logger = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-12
DEGENERACY_MODES = ("central", "one_sided")


@dataclass(frozen=True)
class Regularized:
    """Single-valued operator: below eps_grad the direction term is dropped.

    ``eps_grad=None`` resolves to 1e-8 * (1 + ||u||_inf / h) for the field at hand.
    """

    eps_grad: Optional[float] = None

    def __post_init__(self) -> None:
        if self.eps_grad is not None and not self.eps_grad > 0:
            raise ProblemSpecError(f"eps_grad must be positive, got {self.eps_grad}")

    @property
    def name(self) -> str:
        return "regularized"


@dataclass(frozen=True)
class SubEnvelope:
    @property
    def name(self) -> str:
        return "sub"


@dataclass(frozen=True)
class SuperEnvelope:
    @property
    def name(self) -> str:
        return "super"


EnvelopeMode = Union[Regularized, SubEnvelope, SuperEnvelope]


def parse_envelope(name: str, eps_grad: Optional[float] = None) -> EnvelopeMode:
    key = name.strip().lower()
    if key in ("regularized", "regularised", "reg"):
        return Regularized(eps_grad)
    if key in ("sub", "subenvelope", "sub_envelope"):
        return SubEnvelope()
    if key in ("super", "superenvelope", "super_envelope"):
        return SuperEnvelope()
    raise ProblemSpecError(f"unknown envelope mode {name!r}")


def default_eps_grad(values: np.ndarray, h: float) -> float:
    return 1e-8 * (1.0 + float(np.max(np.abs(values))) / h)


@dataclass(frozen=True)
class ProblemSpec:
    """One instance of the equation on a fixed grid.

    ``c_field`` is the optional zeroth-order coefficient multiplying |u|^theta u.
    """

    p: float
    theta: float
    sigma: float
    B_field: VectorField
    rho_field: ScalarField
    f_field: ScalarField
    g_boundary: Callable[[np.ndarray], np.ndarray]
    m: float = 0.0
    henon_mode: bool = False
    regime_override: bool = False
    c_field: Optional[ScalarField] = None

    def __post_init__(self) -> None:
        if not self.p > 1:
            raise ProblemSpecError(f"p must be > 1, got {self.p}")
        if not self.theta > 0:
            raise ProblemSpecError(f"theta must be > 0, got {self.theta}")
        if not self.regime_override and not (self.theta < self.sigma < self.theta + 1):
            raise ProblemSpecError(
                f"sigma={self.sigma} outside the sublinear range ({self.theta}, {self.theta + 1}); "
                "set regime_override to allow it"
            )
        if self.henon_mode:
            if not 0 <= self.m < 1 + self.theta:
                raise ProblemSpecError(f"m must lie in [0, 1 + theta), got {self.m}")
            if self.m == 0:
                raise ProblemSpecError(
                    "henon_mode with m = 0 would need an indicator nonlinearity; "
                    "use standard mode with an indicator source instead"
                )
        grid = self.B_field.grid
        fields = [self.rho_field, self.f_field] + ([self.c_field] if self.c_field is not None else [])
        if any(not grid.same_as(field.grid) for field in fields):
            raise FieldError("all coefficient fields must live on the same grid")

    @property
    def grid(self) -> Grid:
        return self.B_field.grid

    @property
    def pucci_bounds(self) -> Tuple[float, float]:
        return pucci_bounds(self.p)


def pucci_bounds(p: float) -> Tuple[float, float]:
    """Eigenvalue bounds (min{1, p-1}, max{1, p-1}) of the normalized p-Laplacian."""
    return min(1.0, p - 1.0), max(1.0, p - 1.0)


# --- finite differences -----------------------------------------------------


def gradient_at(values: np.ndarray, grid: Grid, nodes: np.ndarray) -> np.ndarray:
    """Central-difference gradients at ``nodes`` as a (k, dim) array."""
    nodes = np.asarray(nodes, dtype=np.int64)
    out = np.empty((nodes.size, grid.dim))
    for axis, stride in enumerate(grid.strides):
        out[:, axis] = (values[nodes + stride] - values[nodes - stride]) / (2.0 * grid.spacing)
    return out


def hessian_at(values: np.ndarray, grid: Grid, nodes: np.ndarray) -> np.ndarray:
    """Second differences at ``nodes`` as a (k, dim, dim) array, exactly symmetric."""
    nodes = np.asarray(nodes, dtype=np.int64)
    h2 = grid.spacing * grid.spacing
    out = np.empty((nodes.size, grid.dim, grid.dim))
    center = values[nodes]
    for a, sa in enumerate(grid.strides):
        out[:, a, a] = (values[nodes + sa] - 2.0 * center + values[nodes - sa]) / h2
        for b in range(a + 1, grid.dim):
            sb = grid.strides[b]
            cross = (
                values[nodes + sa + sb]
                - values[nodes + sa - sb]
                - values[nodes - sa + sb]
                + values[nodes - sa - sb]
            ) / (4.0 * h2)
            out[:, a, b] = cross
            out[:, b, a] = cross
    return out


def one_sided_gradient_norm(values: np.ndarray, grid: Grid, nodes: np.ndarray) -> np.ndarray:
    """Norm of the per-axis max(|D+u|, |D-u|) vector."""
    nodes = np.asarray(nodes, dtype=np.int64)
    total = np.zeros(nodes.size)
    center = values[nodes]
    for stride in grid.strides:
        forward = np.abs(values[nodes + stride] - center)
        backward = np.abs(center - values[nodes - stride])
        total += (np.maximum(forward, backward) / grid.spacing) ** 2
    return np.sqrt(total)


def upwind_drift(values: np.ndarray, grid: Grid, nodes: np.ndarray, drift: np.ndarray) -> np.ndarray:
    """<B, Du> with forward differences where B_i > 0 and backward ones elsewhere."""
    nodes = np.asarray(nodes, dtype=np.int64)
    center = values[nodes]
    total = np.zeros(nodes.size)
    for axis, stride in enumerate(grid.strides):
        forward = (values[nodes + stride] - center) / grid.spacing
        backward = (center - values[nodes - stride]) / grid.spacing
        b = drift[:, axis]
        total += np.where(b > 0, b * forward, b * backward)
    return total


def _require_interior(grid: Grid, node: int) -> None:
    if not grid.is_interior(node):
        state = grid.classification(node) if 0 <= int(node) < grid.size else "out of range"
        raise GridError(f"node {node} is not Interior ({state})")


def gradient(u: ScalarField, node: int) -> np.ndarray:
    _require_interior(u.grid, node)
    return gradient_at(u.values, u.grid, np.asarray([node]))[0]


def hessian(u: ScalarField, node: int) -> np.ndarray:
    _require_interior(u.grid, node)
    return hessian_at(u.values, u.grid, np.asarray([node]))[0]


# --- pointwise operators ----------------------------------------------------


def _check_symmetric(hess: np.ndarray) -> np.ndarray:
    hess = np.asarray(hess, dtype=float)
    if hess.ndim < 2 or hess.shape[-1] != hess.shape[-2]:
        raise ProblemSpecError(f"expected square matrices, got shape {hess.shape}")
    asym = np.max(np.abs(hess - np.swapaxes(hess, -1, -2))) if hess.size else 0.0
    if asym > SYMMETRY_TOL:
        raise ProblemSpecError(f"matrix is not symmetric (max asymmetry {asym:.3e})")
    return hess


def eig_extremes(hess: np.ndarray) -> Tuple[float, float]:
    """Return (lambda_min, lambda_max) of a symmetric matrix."""
    hess = _check_symmetric(hess)
    eigenvalues = np.linalg.eigvalsh(hess)
    return float(eigenvalues[0]), float(eigenvalues[-1])


def pucci(hess: np.ndarray, lam: float, Lam: float, sign: str) -> float:
    """Pucci extremal operator M^-(sign='minus') or M^+(sign='plus')."""
    if not 0 < lam <= Lam:
        raise ProblemSpecError(f"need 0 < lambda <= Lambda, got {lam}, {Lam}")
    eigenvalues = np.linalg.eigvalsh(_check_symmetric(hess))
    positive = float(np.sum(eigenvalues[eigenvalues > 0]))
    negative = float(np.sum(eigenvalues[eigenvalues < 0]))
    if sign == "minus":
        return lam * positive + Lam * negative
    if sign == "plus":
        return Lam * positive + lam * negative
    raise ProblemSpecError(f"sign must be 'minus' or 'plus', got {sign!r}")


def normalized_p_laplacian_batch(
    grads: np.ndarray,
    hessians: np.ndarray,
    p: float,
    mode: EnvelopeMode,
    eps_grad: Optional[float] = None,
) -> np.ndarray:
    """Delta_p^N for a batch of (gradient, Hessian) pairs.

    At vanishing gradients Regularized drops the direction term while the
    envelopes take the extreme eigenvalue selected by the sign of p - 2.
    """
    if not p > 1:
        raise ProblemSpecError(f"p must be > 1, got {p}")
    grads = np.atleast_2d(np.asarray(grads, dtype=float))
    hessians = np.asarray(hessians, dtype=float).reshape(grads.shape[0], grads.shape[1], grads.shape[1])
    norms = np.linalg.norm(grads, axis=1)
    trace = np.trace(hessians, axis1=1, axis2=2)

    if isinstance(mode, Regularized):
        threshold = mode.eps_grad if mode.eps_grad is not None else (eps_grad or 0.0)
    else:
        threshold = 0.0
    moving = norms > threshold

    out = trace.copy()
    if np.any(moving):
        nu = grads[moving] / norms[moving, None]
        directional = np.einsum("ki,kij,kj->k", nu, hessians[moving], nu)
        out[moving] += (p - 2.0) * directional

    critical = ~moving
    if np.any(critical) and not isinstance(mode, Regularized):
        eigenvalues = np.linalg.eigvalsh(hessians[critical])
        lam_min, lam_max = eigenvalues[:, 0], eigenvalues[:, -1]
        take_max = (p >= 2.0) == isinstance(mode, SubEnvelope)
        out[critical] += (p - 2.0) * (lam_max if take_max else lam_min)
    return out


def normalized_p_laplacian(grad: np.ndarray, hess: np.ndarray, p: float, mode: EnvelopeMode) -> float:
    grad = np.asarray(grad, dtype=float).reshape(-1)
    hess = _check_symmetric(np.asarray(hess, dtype=float).reshape(grad.size, grad.size))
    return float(normalized_p_laplacian_batch(grad[None, :], hess[None, :, :], p, mode)[0])


def degenerate_diffusion(grad: np.ndarray, hess: np.ndarray, p: float, theta: float, mode: EnvelopeMode) -> float:
    """|grad|^theta * Delta_p^N."""
    return float(np.linalg.norm(grad)) ** theta * normalized_p_laplacian(grad, hess, p, mode)


def hamiltonian(node: int, grad: np.ndarray, spec: ProblemSpec) -> float:
    """<B(x), xi>|xi|^theta + rho(x)|xi|^sigma at a node."""
    grad = np.asarray(grad, dtype=float).reshape(-1)
    norm = float(np.linalg.norm(grad))
    drift = float(np.dot(spec.B_field.values[node], grad))
    return drift * norm ** spec.theta + float(spec.rho_field.values[node]) * norm ** spec.sigma


# --- residual ---------------------------------------------------------------


def interior_residual(
    values: np.ndarray,
    spec: ProblemSpec,
    mode: EnvelopeMode,
    nodes: np.ndarray,
    degeneracy: str = "central",
    upwind: bool = False,
    eps_grad: Optional[float] = None,
) -> np.ndarray:
    """Residual LHS - RHS at the given Interior nodes."""
    grid = spec.grid
    grads = gradient_at(values, grid, nodes)
    hessians = hessian_at(values, grid, nodes)
    norms = np.linalg.norm(grads, axis=1)
    lap = normalized_p_laplacian_batch(grads, hessians, spec.p, mode, eps_grad)

    if degeneracy == "central":
        factor = norms ** spec.theta
    elif degeneracy == "one_sided":
        factor = one_sided_gradient_norm(values, grid, nodes) ** spec.theta
    else:
        raise ProblemSpecError(f"unknown degeneracy mode {degeneracy!r}")

    B = spec.B_field.values[nodes]
    drift = upwind_drift(values, grid, nodes, B) if upwind else np.einsum("ki,ki->k", B, grads)

    u = values[nodes]
    lhs = factor * (lap + drift) + spec.rho_field.values[nodes] * norms ** spec.sigma
    if spec.c_field is not None:
        lhs = lhs + spec.c_field.values[nodes] * np.abs(u) ** spec.theta * u

    if spec.henon_mode:
        rhs = spec.f_field.values[nodes] * np.maximum(u, 0.0) ** spec.m
    else:
        rhs = spec.f_field.values[nodes]
    return lhs - rhs


def evaluate_residual(
    values: np.ndarray,
    spec: ProblemSpec,
    mode: EnvelopeMode,
    degeneracy: str = "central",
    upwind: bool = False,
    workers: int = 1,
    eps_grad: Optional[float] = None,
) -> np.ndarray:
    """Residual at every node (zero off the Interior), split into chunks across workers.

    Chunks are contiguous and reassembled in order, so the result does not
    depend on the worker count.
    """
    grid = spec.grid
    if isinstance(mode, Regularized) and mode.eps_grad is None and eps_grad is None:
        eps_grad = default_eps_grad(values, grid.spacing)
    out = np.zeros(grid.size)
    nodes = grid.interior
    if workers <= 1 or nodes.size < 4 * workers:
        out[nodes] = interior_residual(values, spec, mode, nodes, degeneracy, upwind, eps_grad)
        return out

    chunks: List[np.ndarray] = np.array_split(nodes, workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(
            pool.map(
                lambda chunk: interior_residual(values, spec, mode, chunk, degeneracy, upwind, eps_grad),
                chunks,
            )
        )
    out[nodes] = np.concatenate(parts)
    return out


def residual(
    u: ScalarField,
    spec: ProblemSpec,
    mode: EnvelopeMode,
    degeneracy: str = "central",
    upwind: bool = False,
    workers: int = 1,
) -> ScalarField:
    """Residual field of u; Boundary and Exterior nodes carry 0."""
    if not u.grid.same_as(spec.grid):
        raise FieldError("field and problem live on different grids")
    values = evaluate_residual(u.values, spec, mode, degeneracy, upwind, workers)
    return ScalarField(u.grid, values, tag=f"residual[{mode.name}]")
