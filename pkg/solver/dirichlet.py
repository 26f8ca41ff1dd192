"""Dirichlet solver: damped explicit pseudo-time iteration with Perron bracketing.

Each sweep reads one snapshot of the field and writes a fresh one (Jacobi
style), so the result does not depend on how residual evaluation is split
across workers.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from core.errors import BracketError, FieldError, NonFiniteError, ProblemSpecError, SolverDivergenceError
from core.models import ProbeReport, SolveReport
from lattice.grid import Grid, ScalarField, boundary_values, constant_field
from pde.operators import (
    DEGENERACY_MODES,
    EnvelopeMode,
    ProblemSpec,
    Regularized,
    default_eps_grad,
    evaluate_residual,
    gradient_at,
    interior_residual,
    one_sided_gradient_norm,
)

logger = logging.getLogger(__name__)

MONOTONE_WINDOW = 50
NEWTON_STEPS = 60

SweepCallback = Callable[[int, float, float], None]


@dataclass(frozen=True)
class SolverConfig:
    """Iteration controls.

    ``grad_floor`` bounds the gradient used in the time step from below;
    ``None`` picks 0.1 * (||f|| R)^(1/(1+theta)) + osc(g)/R, the natural
    gradient scale of the data.
    """

    tol: float = 1e-8
    max_iters: int = 200_000
    dt_safety: float = 0.5
    envelope: EnvelopeMode = field(default_factory=Regularized)
    damping: float = 1.0
    log_every: int = 1000
    degeneracy: str = "one_sided"
    upwind: bool = False
    boundary_eval: str = "projection"
    grad_floor: Optional[float] = None
    workers: int = 1
    divergence_factor: float = 1e3

    def __post_init__(self) -> None:
        if not self.tol > 0:
            raise ProblemSpecError(f"tol must be positive, got {self.tol}")
        if self.max_iters < 1:
            raise ProblemSpecError(f"max_iters must be >= 1, got {self.max_iters}")
        if not 0 < self.dt_safety <= 1:
            raise ProblemSpecError(f"dt_safety must lie in (0, 1], got {self.dt_safety}")
        if not 0 < self.damping <= 1:
            raise ProblemSpecError(f"damping must lie in (0, 1], got {self.damping}")
        if self.log_every < 1:
            raise ProblemSpecError(f"log_every must be >= 1, got {self.log_every}")
        if self.degeneracy not in DEGENERACY_MODES:
            raise ProblemSpecError(f"degeneracy must be one of {DEGENERACY_MODES}")
        if self.boundary_eval not in ("projection", "nodal"):
            raise ProblemSpecError("boundary_eval must be 'projection' or 'nodal'")
        if self.grad_floor is not None and not self.grad_floor > 0:
            raise ProblemSpecError(f"grad_floor must be positive, got {self.grad_floor}")
        if self.workers < 1:
            raise ProblemSpecError(f"workers must be >= 1, got {self.workers}")


def default_initial_guess(spec: ProblemSpec, grid: Grid, boundary_eval: str = "projection") -> ScalarField:
    """Radial interpolation between the mean boundary value at the center and g on the sphere."""
    pinned = boundary_values(grid, spec.g_boundary, boundary_eval)
    mean = float(np.mean(pinned)) if pinned.size else 0.0
    coords = grid.coords()
    radius = grid.domain.radius
    t = np.clip(np.linalg.norm(coords - grid.center, axis=1) / radius, 0.0, 1.0)
    on_sphere = np.asarray(spec.g_boundary(grid.project_to_sphere(coords)), dtype=float).reshape(-1)
    values = t * on_sphere + (1.0 - t) * mean
    values[grid.boundary] = pinned
    return ScalarField(grid, values, tag="initial-guess")


def comparison_check(u_sub: ScalarField, u_super: ScalarField) -> float:
    """max over Interior nodes of (u_sub - u_super)_+; zero when the ordering holds."""
    if not u_sub.grid.same_as(u_super.grid):
        raise FieldError("comparison_check needs fields on the same grid")
    nodes = u_sub.grid.interior
    gap = u_sub.values[nodes] - u_super.values[nodes]
    return float(max(0.0, np.max(gap))) if gap.size else 0.0


def solve_dirichlet(
    spec: ProblemSpec,
    grid: Grid,
    cfg: SolverConfig,
    init: Optional[ScalarField] = None,
    on_sweep: Optional[SweepCallback] = None,
) -> Tuple[ScalarField, SolveReport]:
    """Solve the Dirichlet problem from ``init`` (radial interpolation of g by default)."""
    _check_grid(spec, grid)
    if init is None:
        init = default_initial_guess(spec, grid, cfg.boundary_eval)
    elif not init.grid.same_as(grid):
        raise FieldError("initial guess lives on a different grid")
    return _iterate(spec, grid, cfg, init.values, None, on_sweep)


def perron_bracket(
    spec: ProblemSpec,
    grid: Grid,
    cfg: SolverConfig,
    u_sub: ScalarField,
    u_super: ScalarField,
    on_sweep: Optional[SweepCallback] = None,
) -> Tuple[ScalarField, SolveReport]:
    """Iterate from the supersolution with Interior values clamped into [u_sub, u_super]."""
    _check_grid(spec, grid)
    if not (u_sub.grid.same_as(grid) and u_super.grid.same_as(grid)):
        raise BracketError("bracket fields live on a different grid")
    gap = comparison_check(u_sub, u_super)
    if gap > cfg.tol:
        raise BracketError(f"u_sub exceeds u_super by {gap:.3e} at an Interior node")

    pinned = boundary_values(grid, spec.g_boundary, cfg.boundary_eval)
    nodes = grid.boundary
    if np.any(u_sub.values[nodes] > pinned + cfg.tol) or np.any(u_super.values[nodes] < pinned - cfg.tol):
        raise BracketError("bracket does not enclose the boundary data")

    if np.array_equal(u_sub.values[grid.interior], u_super.values[grid.interior]):
        values = np.array(u_super.values)
        values[nodes] = pinned
        res = evaluate_residual(values, spec, cfg.envelope, cfg.degeneracy, cfg.upwind, cfg.workers)
        final = float(np.max(np.abs(res[grid.interior])))
        report = SolveReport(
            iterations=0,
            final_residual=final,
            converged=final <= cfg.tol,
            wall_seconds=0.0,
            history=[(0, final, 0.0)],
            initial_residual=final,
        )
        return ScalarField(grid, values, tag="perron"), report

    bounds = (np.asarray(u_sub.values), np.asarray(u_super.values))
    start = np.clip(u_super.values, bounds[0], bounds[1])
    return _iterate(spec, grid, cfg, start, bounds, on_sweep)


def henon_barriers(spec: ProblemSpec, grid: Grid, cfg: SolverConfig) -> Tuple[ScalarField, ScalarField]:
    """Constant sub/supersolution pair [min(0, min g), max(0, max g)] for the absorption problem.

    A constant has no gradient, so its residual reduces to the zeroth-order
    terms: -weight * u_+^m vanishes below zero and is non-positive above it
    for a nonnegative weight. Both signs are checked on the grid.
    """
    if not spec.henon_mode:
        raise ProblemSpecError("henon_barriers needs a problem in henon_mode")
    pinned = boundary_values(grid, spec.g_boundary, cfg.boundary_eval)
    low = min(0.0, float(np.min(pinned))) if pinned.size else 0.0
    high = max(0.0, float(np.max(pinned))) if pinned.size else 0.0
    sub = constant_field(grid, low, tag="henon-sub")
    sup = constant_field(grid, high, tag="henon-super")

    nodes = grid.interior
    sub_res = evaluate_residual(sub.values, spec, cfg.envelope, cfg.degeneracy, cfg.upwind, cfg.workers)[nodes]
    sup_res = evaluate_residual(sup.values, spec, cfg.envelope, cfg.degeneracy, cfg.upwind, cfg.workers)[nodes]
    if np.any(sub_res < -cfg.tol):
        raise BracketError(f"constant {low:g} is not a subsolution (residual {float(np.min(sub_res)):.3e})")
    if np.any(sup_res > cfg.tol):
        raise BracketError(f"constant {high:g} is not a supersolution (residual {float(np.max(sup_res)):.3e})")
    logger.info("henon barriers: [%g, %g]", low, high)
    return sub, sup


def monotonicity_probe(
    spec: ProblemSpec,
    grid: Grid,
    node: int,
    magnitude: float,
    u: Optional[ScalarField] = None,
    envelope: Optional[EnvelopeMode] = None,
    degeneracy: str = "central",
    upwind: bool = False,
) -> ProbeReport:
    """Raise each stencil value at ``node`` by ``magnitude`` and record the residual response.

    A monotone scheme responds with a non-negative change to raising any
    neighbor and a non-positive change to raising the center.
    """
    if not grid.is_interior(node):
        raise ProblemSpecError(f"probe node {node} is not Interior")
    base_field = u if u is not None else default_initial_guess(spec, grid)
    mode = envelope if envelope is not None else Regularized()
    values = np.array(base_field.values)
    eps = default_eps_grad(values, grid.spacing)
    at = np.asarray([node])

    def response(shifted: np.ndarray) -> float:
        return float(interior_residual(shifted, spec, mode, at, degeneracy, upwind, eps)[0])

    base = response(values)
    slack = 1e-9 * (1.0 + abs(base)) + 1e-12 * magnitude

    neighbor_deltas = {}
    violations = []
    for shift in _stencil_shifts(grid.dim):
        offset = sum(s * stride for s, stride in zip(shift, grid.strides))
        perturbed = values.copy()
        perturbed[node + offset] += magnitude
        delta = response(perturbed) - base
        neighbor_deltas[shift] = delta
        if delta < -slack:
            violations.append(shift)

    perturbed = values.copy()
    perturbed[node] += magnitude
    center_delta = response(perturbed) - base
    monotone = not violations and center_delta <= slack
    if not monotone:
        logger.info("node %d: non-monotone stencil response (%d neighbors); consider upwind drift", node, len(violations))
    return ProbeReport(
        node=int(node),
        magnitude=float(magnitude),
        center_delta=center_delta,
        neighbor_deltas=neighbor_deltas,
        monotone=monotone,
        violations=violations,
    )


def _stencil_shifts(dim: int) -> List[Tuple[int, ...]]:
    shifts = []
    for flat in range(3 ** dim):
        shift = tuple((flat // 3 ** k) % 3 - 1 for k in reversed(range(dim)))
        if any(shift):
            shifts.append(shift)
    return shifts


def _check_grid(spec: ProblemSpec, grid: Grid) -> None:
    if not spec.grid.same_as(grid):
        raise FieldError("problem coefficients live on a different grid")


def _auto_grad_floor(spec: ProblemSpec, grid: Grid, pinned: np.ndarray) -> float:
    radius = grid.domain.radius
    source = spec.f_field.sup_norm()
    if spec.henon_mode:
        source *= float(np.max(np.abs(pinned))) ** spec.m if pinned.size else 0.0
    oscillation = float(np.ptp(pinned)) if pinned.size else 0.0
    scale = (source * radius) ** (1.0 / (1.0 + spec.theta)) + oscillation / radius
    return max(0.1 * scale, default_eps_grad(pinned if pinned.size else np.zeros(1), grid.spacing))


def _time_steps(
    values: np.ndarray,
    spec: ProblemSpec,
    grid: Grid,
    cfg: SolverConfig,
    floor: float,
) -> np.ndarray:
    """Nodewise explicit step from the local diffusion, drift and Hamiltonian speeds."""
    nodes = grid.interior
    h = grid.spacing
    _, Lam = spec.pucci_bounds
    grads = gradient_at(values, grid, nodes)
    norms = np.linalg.norm(grads, axis=1)
    if cfg.degeneracy == "one_sided":
        degenerate = one_sided_gradient_norm(values, grid, nodes)
    else:
        degenerate = norms
    a = np.maximum(degenerate, floor) ** spec.theta

    speed = 2.0 * grid.dim * Lam * a / (h * h)
    speed += a * np.sum(np.abs(spec.B_field.values[nodes]), axis=1) / h
    rho = np.abs(spec.rho_field.values[nodes])
    speed += rho * spec.sigma * np.maximum(norms, floor) ** (spec.sigma - 1.0) / h
    if spec.c_field is not None:
        u = np.abs(values[nodes])
        speed += np.abs(spec.c_field.values[nodes]) * (1.0 + spec.theta) * u ** spec.theta
    return cfg.dt_safety / speed


def _stationarity(
    res: np.ndarray,
    values: np.ndarray,
    nodes: np.ndarray,
    henon: bool,
    bounds: Optional[Tuple[np.ndarray, np.ndarray]],
) -> np.ndarray:
    """Residual with components that only push against an active constraint removed."""
    r = res[nodes].copy()
    u = values[nodes]
    if henon:
        r[(u <= 0.0) & (r < 0.0)] = 0.0
    if bounds is not None:
        lower, upper = bounds[0][nodes], bounds[1][nodes]
        r[(u <= lower) & (r < 0.0)] = 0.0
        r[(u >= upper) & (r > 0.0)] = 0.0
    return r


def _absorbing_update(
    old: np.ndarray,
    res: np.ndarray,
    step: np.ndarray,
    weight: np.ndarray,
    m: float,
) -> np.ndarray:
    """One pseudo-time step with the absorption weight * u_+^m taken implicitly.

    Everything else in the residual stays explicit: with k = step * weight
    and s the step without absorption, the new value solves v + k v_+^m = s.
    The fixed points are those of the explicit step, but the step stays
    stable where u^m is not Lipschitz (u near 0, m < 1).
    """
    absorbing = weight > 0.0
    k = np.where(absorbing, step * weight, 0.0)
    s = old + step * res + k * np.maximum(old, 0.0) ** m
    update = np.where(absorbing, s, old + step * res)
    solve = absorbing & (s > 0.0)
    if np.any(solve):
        update[solve] = _absorption_root(s[solve], k[solve], m)
    return update


def _absorption_root(s: np.ndarray, k: np.ndarray, m: float) -> np.ndarray:
    """Positive root of v + k v^m = s (s, k > 0) by Newton from above on a convex form."""
    # For m < 1 the equation is convex in t = v^m; for m >= 1 it is convex in v.
    q = 1.0 / m if m < 1.0 else 1.0
    power = 1.0 if m < 1.0 else m
    t = np.minimum(s / k, s ** m) if m < 1.0 else np.minimum(s, (s / k) ** (1.0 / m))
    for _ in range(NEWTON_STEPS):
        value = t ** q + k * t ** power - s
        slope = q * t ** (q - 1.0) + k * power * t ** (power - 1.0)
        delta = value / slope
        t = t - delta
        if np.all(np.abs(delta) <= 4.0 * np.finfo(float).eps * t):
            break
    t = np.maximum(t, 0.0)
    return t ** q if m < 1.0 else t


def _iterate(
    spec: ProblemSpec,
    grid: Grid,
    cfg: SolverConfig,
    start: np.ndarray,
    bounds: Optional[Tuple[np.ndarray, np.ndarray]],
    on_sweep: Optional[SweepCallback],
) -> Tuple[ScalarField, SolveReport]:
    started = time.perf_counter()
    nodes = grid.interior
    values = np.array(start, dtype=float)
    pinned = boundary_values(grid, spec.g_boundary, cfg.boundary_eval)
    values[grid.boundary] = pinned
    floor = cfg.grad_floor if cfg.grad_floor is not None else _auto_grad_floor(spec, grid, pinned)

    def residual_and_norm(current: np.ndarray) -> Tuple[np.ndarray, float]:
        res_full = evaluate_residual(current, spec, cfg.envelope, cfg.degeneracy, cfg.upwind, cfg.workers)
        stationary = _stationarity(res_full, current, nodes, spec.henon_mode, bounds)
        return res_full, (float(np.max(np.abs(stationary))) if stationary.size else 0.0)

    res, norm = residual_and_norm(values)
    initial = norm
    norms: List[float] = [norm]
    history: List[Tuple[int, float, float]] = [(0, norm, 0.0)]
    logger.info("solve start: nodes=%d interior=%d residual=%.3e floor=%.3e", grid.size, nodes.size, norm, floor)

    iteration = 0
    while norm > cfg.tol and iteration < cfg.max_iters:
        iteration += 1
        dt = _time_steps(values, spec, grid, cfg, floor)
        old = values[nodes]
        step = cfg.damping * dt
        if spec.henon_mode:
            update = _absorbing_update(old, res[nodes], step, spec.f_field.values[nodes], spec.m)
            update = np.where(old >= 0.0, np.maximum(update, 0.0), update)
        else:
            update = old + step * res[nodes]
        if bounds is not None:
            update = np.clip(update, bounds[0][nodes], bounds[1][nodes])

        bad = np.flatnonzero(~np.isfinite(update))
        if bad.size:
            node = int(nodes[bad[0]])
            raise NonFiniteError(
                f"non-finite value at node {node} {list(grid.coords([node])[0])} after {iteration} sweeps",
                node=node,
                coords=grid.coords([node])[0],
            )
        values[nodes] = update
        res, norm = residual_and_norm(values)
        norms.append(norm)

        if norm > cfg.divergence_factor * max(initial, np.finfo(float).tiny):
            trace = [entry[1] for entry in history] + [norm]
            logger.error("solver diverged at sweep %d: residual %.3e (initial %.3e)", iteration, norm, initial)
            raise SolverDivergenceError(
                f"residual grew from {initial:.3e} to {norm:.3e} after {iteration} sweeps", trace=trace
            )

        if iteration % cfg.log_every == 0:
            dt_min = float(np.min(dt)) if dt.size else 0.0
            history.append((iteration, norm, dt_min))
            logger.info("sweep %d residual=%.3e dt_min=%.3e", iteration, norm, dt_min)
            if on_sweep is not None:
                on_sweep(iteration, norm, dt_min)

    if history[-1][0] != iteration:
        history.append((iteration, norm, 0.0))

    flags = []
    if not _monotone_tail(norms, initial):
        flags.append("non_monotone_residual")
    report = SolveReport(
        iterations=iteration,
        final_residual=norm,
        converged=norm <= cfg.tol,
        wall_seconds=time.perf_counter() - started,
        history=history,
        initial_residual=initial,
        flags=flags,
    )
    if not report.converged:
        logger.warning("no convergence after %d sweeps: residual %.3e > tol %.1e", iteration, norm, cfg.tol)
    return ScalarField(grid, values, tag="solution"), report


def _monotone_tail(norms: List[float], initial: float) -> bool:
    """Residual is non-increasing across every 50-sweep window once below 10x its start."""
    series = np.asarray(norms)
    below = np.flatnonzero(series <= 10.0 * initial)
    if below.size == 0:
        return False
    tail = series[below[0]:]
    if tail.size <= MONOTONE_WINDOW:
        return True
    later, earlier = tail[MONOTONE_WINDOW:], tail[:-MONOTONE_WINDOW]
    return bool(np.all(later <= earlier * (1.0 + 1e-9) + 1e-300))
