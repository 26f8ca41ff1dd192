"""Turn a parsed ExperimentConfig into grid, problem and solver settings."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from core.config import ExperimentConfig, Setting
from core.errors import ConfigError, ProblemSpecError
from lattice.grid import Grid, ScalarField, build_grid, boundary_values, constant_field, sample, sample_vector
from pde.expressions import compile_scalar, compile_vector
from pde.operators import ProblemSpec, parse_envelope
from pde.profiles import AnalyticProfile, build_profile, henon_weight
from solver.dirichlet import SolverConfig, henon_barriers

logger = logging.getLogger(__name__)

PointFn = Callable[[np.ndarray], np.ndarray]


@dataclass
class Experiment:
    config: ExperimentConfig
    grid: Grid
    spec: ProblemSpec
    solver: SolverConfig
    profile: Optional[AnalyticProfile] = None


def build_experiment_grid(config: ExperimentConfig) -> Grid:
    grid = config.grid
    return build_grid(grid.dim, grid.h, grid.center, grid.radius)


def build_solver_config(config: ExperimentConfig, workers: int = 1) -> SolverConfig:
    block = config.solver
    return SolverConfig(
        tol=block.tol,
        max_iters=block.max_iters,
        dt_safety=block.dt_safety,
        envelope=parse_envelope(block.envelope, block.eps_grad),
        damping=block.damping,
        log_every=block.log_every,
        degeneracy=block.degeneracy,
        upwind=block.upwind,
        boundary_eval=block.boundary_eval,
        grad_floor=block.grad_floor,
        workers=workers,
    )


def build_config_profile(config: ExperimentConfig) -> Optional[AnalyticProfile]:
    """Registry profile named in [profile], sharing p, theta, sigma and m with [problem]."""
    if not config.profile.name:
        return None
    problem = config.problem
    params = {"p": problem.p, "theta": problem.theta, "sigma": problem.sigma, "m": problem.m}
    params.update(config.profile.params)
    try:
        return build_profile(config.profile.name, params, n=config.grid.dim)
    except ProblemSpecError as exc:
        raise ConfigError(f"[profile] {exc}", "name") from None


def _is_profile(setting: Setting) -> bool:
    return setting.value.strip().lower() == "profile"


def _scalar(setting: Setting, dim: int, profile_fn: Optional[PointFn]) -> PointFn:
    if _is_profile(setting):
        if profile_fn is None:
            raise ConfigError(f"profile provides no {setting.key} coefficient", setting.key, setting.lineno)
        return profile_fn
    return compile_scalar(setting.value, dim, setting.key, setting.lineno)


def _vector(setting: Setting, dim: int, profile_fn: Optional[PointFn]) -> PointFn:
    if _is_profile(setting):
        if profile_fn is None:
            raise ConfigError(f"profile provides no {setting.key} coefficient", setting.key, setting.lineno)
        return profile_fn
    return compile_vector(setting.value, dim, setting.key, setting.lineno)


def build_problem(config: ExperimentConfig, grid: Grid, profile: Optional[AnalyticProfile] = None) -> ProblemSpec:
    """Sample every coefficient on ``grid``.

    When f comes from the profile, the Henon switch and exponent m come from
    the profile too; otherwise they come from [problem]. A positive
    ``weight_alpha`` in [analysis] multiplies f by dist(x, B_r(x0))^alpha.
    """
    dim = grid.dim
    block = config.coefficients
    coeffs = profile.coeffs if profile is not None else None

    B = sample_vector(_vector(block.B, dim, coeffs.B if coeffs else None), grid, tag="B")
    rho = sample(_scalar(block.rho, dim, coeffs.rho if coeffs else None), grid, tag="rho")
    f_fn = _scalar(block.f, dim, coeffs.f if coeffs else None)
    f = sample(f_fn, grid, tag="f")
    if config.analysis.weight_alpha > 0:
        center = (profile.extras.get("x0") if profile is not None else None) or config.grid.center
        radius = float(profile.params.get("r", 0.0)) if profile is not None else 0.0
        weight = sample(henon_weight(1.0, config.analysis.weight_alpha, center, radius), grid, tag="weight")
        f = f.with_values(f.values * weight.values, tag="f")

    c_field: Optional[ScalarField] = None
    if block.c is not None:
        c_field = sample(_scalar(block.c, dim, coeffs.c if coeffs else None), grid, tag="c")

    if _is_profile(block.g):
        if profile is None:
            raise ConfigError("g = profile needs a [profile] entry", "g", block.g.lineno)
        g = profile.value
    else:
        g = compile_scalar(block.g.value, dim, "g", block.g.lineno)

    problem = config.problem
    if _is_profile(block.f) and coeffs is not None:
        henon_mode, m = coeffs.henon_mode, coeffs.m
    else:
        henon_mode, m = problem.henon_mode, problem.m
    regime_override = problem.regime_override or (
        profile is not None and not problem.theta < problem.sigma < problem.theta + 1.0
    )
    try:
        return ProblemSpec(
            p=problem.p,
            theta=problem.theta,
            sigma=problem.sigma,
            B_field=B,
            rho_field=rho,
            f_field=f,
            g_boundary=g,
            m=m,
            henon_mode=henon_mode,
            regime_override=regime_override,
            c_field=c_field,
        )
    except ProblemSpecError as exc:
        raise ConfigError(f"[problem] {exc}") from None


def build_experiment(config: ExperimentConfig, workers: int = 1) -> Experiment:
    grid = build_experiment_grid(config)
    profile = build_config_profile(config)
    spec = build_problem(config, grid, profile)
    solver = build_solver_config(config, workers)
    logger.info("experiment %s: %d nodes (%d interior)", config.path, grid.size, grid.interior.size)
    return Experiment(config=config, grid=grid, spec=spec, solver=solver, profile=profile)


def bracket_fields(experiment: Experiment) -> Optional[Tuple[ScalarField, ScalarField]]:
    """Sub/supersolution pair requested by [solver] bracket, or None."""
    kind = experiment.config.solver.bracket
    if kind == "none":
        return None
    spec, grid, cfg = experiment.spec, experiment.grid, experiment.solver
    if kind == "barriers":
        if not spec.henon_mode:
            raise ConfigError("bracket = barriers needs a Henon problem (henon_mode with m > 0)", "bracket")
        return henon_barriers(spec, grid, cfg)

    pinned = boundary_values(grid, spec.g_boundary, cfg.boundary_eval)
    g_sup = float(np.max(np.abs(pinned))) if pinned.size else 0.0
    margin = experiment.config.solver.bracket_margin
    if spec.henon_mode and (pinned.size == 0 or float(np.min(pinned)) >= 0.0):
        lower = constant_field(grid, 0.0, tag="bracket-sub")
    else:
        lower = constant_field(grid, -g_sup - margin, tag="bracket-sub")
    upper = constant_field(grid, g_sup + margin, tag="bracket-super")
    return lower, upper


def resolve_x0(u: ScalarField, spec) -> np.ndarray:
    """Point for exponent fits: 'argmin' / 'argmax' over Interior nodes, 'center' or coordinates."""
    grid = u.grid
    if isinstance(spec, str):
        if spec == "center":
            return np.array(grid.center, dtype=float)
        interior = u.values[grid.interior]
        if interior.size == 0:
            raise ConfigError(f"x0 = {spec} needs Interior nodes", "x0")
        pick = np.argmin(interior) if spec == "argmin" else np.argmax(interior)
        return grid.coords([grid.interior[pick]])[0]
    point = np.asarray(spec, dtype=float).reshape(-1)
    if point.size != grid.dim:
        raise ConfigError(f"x0 needs {grid.dim} coordinates, got {point.size}", "x0")
    return point
