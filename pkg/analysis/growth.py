"""Growth and non-degeneracy exponents from log-log fits over dyadic radii."""

from __future__ import annotations

import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from core.errors import InsufficientDataError
from core.models import FitResult
from lattice.grid import ScalarField, argsup_over_sphere, as_point, interpolate, sup_over_ball

logger = logging.getLogger(__name__)

MIN_SAMPLES = 4


def dyadic_radii(first: int = 2, last: int = 5) -> List[float]:
    """Radii 2^-first, ..., 2^-last."""
    return [2.0 ** (-k) for k in range(first, last + 1)]


def point_value(u: ScalarField, x0) -> float:
    return float(interpolate(u, as_point(x0, u.grid.dim)[None, :])[0])


def fit_power_law(abscissae: Sequence[float], values: Sequence[float]) -> Tuple[float, float, float]:
    """Least-squares slope, intercept and r^2 of log(values) against log(abscissae)."""
    fit = stats.linregress(np.log(np.asarray(abscissae, dtype=float)), np.log(np.asarray(values, dtype=float)))
    return float(fit.slope), float(fit.intercept), float(min(1.0, max(0.0, fit.rvalue ** 2)))


def _noise_floor(u: ScalarField) -> float:
    return 10.0 * np.finfo(float).eps * max(u.sup_norm(), np.finfo(float).tiny)


def _ordered_radii(radii: Sequence[float]) -> List[float]:
    return sorted({float(r) for r in radii if r > 0}, reverse=True)


def growth_exponent(u: ScalarField, x0, radii: Sequence[float]) -> FitResult:
    """Fit sup_{B_r(x0)} |u - u(x0)| ~ C r^gamma with u(x0) interpolated multilinearly."""
    radii = _ordered_radii(radii)
    center_value = point_value(u, x0)
    deviation = u.with_values(np.abs(u.values - center_value), tag="deviation")
    floor = _noise_floor(u)

    samples, dropped = [], 0
    for r in radii:
        value = sup_over_ball(deviation, x0, r)
        if value <= floor:
            dropped += 1
            continue
        samples.append((r, value))
    if len(samples) < MIN_SAMPLES:
        raise InsufficientDataError(
            f"insufficient decay data: {len(samples)} usable radii of {len(radii)} ({dropped} below noise)"
        )
    slope, intercept, r2 = fit_power_law([s[0] for s in samples], [s[1] for s in samples])
    logger.debug("growth exponent %.4f (r2=%.5f, dropped=%d)", slope, r2, dropped)
    return FitResult(
        exponent=slope,
        log_intercept=intercept,
        r_squared=r2,
        radii=radii,
        samples=samples,
        dropped=dropped,
    )


def nondegeneracy_curve(u: ScalarField, x0, radii: Sequence[float], target: Optional[float] = None) -> FitResult:
    """Fit the shell maxima of (u - u(x0))_+ and report min value / r^target.

    Each sample is paired with the distance of the shell node attaining the
    maximum, which removes the shell-thickness bias at small radii.
    ``target`` defaults to the fitted exponent.
    """
    radii = _ordered_radii(radii)
    center = as_point(x0, u.grid.dim)
    center_value = point_value(u, center)
    excess = u.with_values(np.maximum(u.values - center_value, 0.0), tag="excess")
    floor = _noise_floor(u)

    samples, dropped = [], 0
    for r in radii:
        value, node = argsup_over_sphere(excess, center, r)
        if value <= floor:
            dropped += 1
            continue
        distance = float(np.linalg.norm(u.grid.coords([node])[0] - center))
        samples.append((distance, value))
    if not samples:
        raise InsufficientDataError("all shell values nonpositive")
    if len(samples) < MIN_SAMPLES:
        raise InsufficientDataError(f"insufficient decay data: {len(samples)} positive shell samples")

    slope, intercept, r2 = fit_power_law([s[0] for s in samples], [s[1] for s in samples])
    exponent = slope if target is None else float(target)
    constant = min(value / distance ** exponent for distance, value in samples)
    return FitResult(
        exponent=slope,
        log_intercept=intercept,
        r_squared=r2,
        radii=radii,
        samples=samples,
        dropped=dropped,
        constant=float(constant),
        target=exponent,
    )


def regularity_hypotheses(theta: float, sigma: float, m: float = 0.0, alpha: float = 0.0) -> Dict[str, object]:
    """Which hypotheses of the higher-regularity and Henon statements the parameters meet.

    Recorded alongside exponent fits; nothing here is enforced.
    """
    alpha_min = (sigma - m * (2.0 + theta - sigma)) / (1.0 + theta - sigma) if sigma < 1.0 + theta else None
    return {
        "sublinear": bool(theta < sigma < 1.0 + theta),
        "alpha_lower_bound": alpha_min,
        "alpha_meets_bound": None if alpha_min is None else bool(alpha >= alpha_min),
        "m_in_range": bool(0.0 <= m < 1.0 + theta),
        "sigma_below_henon_cap": bool(sigma <= m * (2.0 + theta) / (m + 1.0)),
        "m_above_half_theta": bool(m > theta / 2.0),
        "growth_target": (2.0 + theta + alpha) / (1.0 + theta - m) if m < 1.0 + theta else None,
    }


def regularity_scale(u: ScalarField, rho: ScalarField, f: ScalarField, theta: float, sigma: float) -> float:
    """||u|| + ||rho||^(1/(1+theta-sigma)) + ||f||^(1/(1+theta)), the scale of the gradient estimate."""
    nodes = u.grid.non_exterior
    scale = u.sup_norm(nodes) + f.sup_norm(nodes) ** (1.0 / (1.0 + theta))
    if sigma < 1.0 + theta:
        scale += rho.sup_norm(nodes) ** (1.0 / (1.0 + theta - sigma))
    return float(scale)
