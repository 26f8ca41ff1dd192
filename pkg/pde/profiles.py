"""Closed-form profiles, barriers and exponents used as oracles.

Each profile carries the coefficient generators it solves for, so a profile
is never paired with foreign coefficients. Every callable takes an (N, dim)
array of points.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from core.errors import ProblemSpecError
from core.models import HenonConstants, ReferenceExponents
from lattice.grid import Grid, ScalarField, VectorField, sample, sample_vector
from pde.operators import ProblemSpec, pucci_bounds

logger = logging.getLogger(__name__)

PointFn = Callable[[np.ndarray], np.ndarray]


@dataclass
class CoefficientSet:
    B: PointFn
    rho: PointFn
    f: PointFn
    m: float = 0.0
    henon_mode: bool = False
    c: Optional[PointFn] = None


@dataclass
class AnalyticProfile:
    name: str
    dim: int
    value: PointFn
    grad: Optional[PointFn] = None
    hess: Optional[PointFn] = None
    coeffs: Optional[CoefficientSet] = None
    validity: Optional[PointFn] = None
    params: Dict[str, float] = field(default_factory=dict)
    flags: Dict[str, bool] = field(default_factory=dict)
    extras: Dict[str, object] = field(default_factory=dict)
    singular_set: str = ""

    def valid(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        if self.validity is None:
            return np.ones(points.shape[0], dtype=bool)
        return np.asarray(self.validity(points), dtype=bool)


def _const_scalar(value: float) -> PointFn:
    return lambda x: np.full(np.atleast_2d(x).shape[0], float(value))


def _const_vector(vector: Sequence[float]) -> PointFn:
    vector = np.asarray(vector, dtype=float)
    return lambda x: np.tile(vector, (np.atleast_2d(x).shape[0], 1))


def _quiet(fn: PointFn) -> PointFn:
    """Silence 0 ** negative warnings; callers mask singular points through validity."""

    def wrapper(x: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return fn(x)

    return wrapper


def _radial_parts(x: np.ndarray, x0: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    delta = np.atleast_2d(x) - x0
    rho = np.linalg.norm(delta, axis=1)
    safe = np.where(rho > 0, rho, 1.0)
    e = delta / safe[:, None]
    return delta, rho, e


def _radial_hessian(e: np.ndarray, rho: np.ndarray, d1: np.ndarray, d2: np.ndarray) -> np.ndarray:
    """Hessian of a radial function with radial derivatives d1 = phi', d2 = phi''."""
    dim = e.shape[1]
    outer = np.einsum("ki,kj->kij", e, e)
    eye = np.eye(dim)[None, :, :]
    safe = np.where(rho > 0, rho, 1.0)
    return d2[:, None, None] * outer + (d1 / safe)[:, None, None] * (eye - outer)


def _punctured_unit_ball(x: np.ndarray) -> np.ndarray:
    rho = np.linalg.norm(np.atleast_2d(x), axis=1)
    return (rho > 0) & (rho < 1.0)


# --- Henon ------------------------------------------------------------------


def henon_constants(theta: float, p: float, m: float, sigma: Optional[float] = None) -> HenonConstants:
    """Growth exponent beta_hat = (2+theta)/(1+theta-m) and the printed profile constant."""
    if not p > 1:
        raise ProblemSpecError(f"p must be > 1, got {p}")
    if not theta > 0:
        raise ProblemSpecError(f"theta must be > 0, got {theta}")
    if not 0 <= m < 1 + theta:
        raise ProblemSpecError(f"m must lie in [0, 1 + theta) = [0, {1 + theta}), got {m}")
    beta_hat = (2.0 + theta) / (1.0 + theta - m)
    c_profile = (1.0 / beta_hat) * ((p - 1.0) * (beta_hat - 1.0) + 1.0) ** (-1.0 / (1.0 + theta))
    sigma_ok = None if sigma is None else bool(sigma <= m * (2.0 + theta) / (m + 1.0))
    return HenonConstants(
        beta_hat=beta_hat,
        c_profile=c_profile,
        sigma_admissible=sigma_ok,
        m_admissible=bool(m > theta / 2.0),
    )


def calibrated_henon_constant(theta: float, p: float, m: float) -> float:
    """Constant making c*s_+^beta_hat an exact solution against the right-hand side u^m."""
    beta = henon_constants(theta, p, m).beta_hat
    return (beta ** (1.0 + theta) * ((p - 1.0) * (beta - 1.0) + 1.0)) ** (-1.0 / (1.0 + theta - m))


def henon_weight(c0: float, alpha: float, center: Sequence[float], radius: float) -> PointFn:
    """Weight c0 * dist(x, B_radius(center))^alpha."""
    center = np.asarray(center, dtype=float)

    def weight(x: np.ndarray) -> np.ndarray:
        dist = np.maximum(np.linalg.norm(np.atleast_2d(x) - center, axis=1) - radius, 0.0)
        return c0 * dist ** alpha

    return weight


def profile_henon(
    n: int,
    theta: float,
    p: float,
    m: float,
    sigma: float,
    r: float,
    R: float,
    x0: Optional[Sequence[float]] = None,
    calibrated: bool = False,
) -> AnalyticProfile:
    """Radial dead-core profile c (|x - x0| - r)_+^beta_hat with its drift and rho."""
    if not 0 < r < R:
        raise ProblemSpecError(f"need 0 < r < R, got r={r}, R={R}")
    constants = henon_constants(theta, p, m, sigma)
    beta = constants.beta_hat
    c = calibrated_henon_constant(theta, p, m) if calibrated and m > 0 else constants.c_profile
    center = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).reshape(n)
    rho_exponent = (beta - 1.0) * (1.0 + theta - sigma) - 1.0

    def value(x):
        _, rho, _ = _radial_parts(x, center)
        return c * np.maximum(rho - r, 0.0) ** beta

    def grad(x):
        _, rho, e = _radial_parts(x, center)
        s = np.maximum(rho - r, 0.0)
        return (c * beta * s ** (beta - 1.0))[:, None] * e

    @_quiet
    def hess(x):
        _, rho, e = _radial_parts(x, center)
        s = np.maximum(rho - r, 0.0)
        return _radial_hessian(e, rho, c * beta * s ** (beta - 1.0), c * beta * (beta - 1.0) * s ** (beta - 2.0))

    def drift(x):
        delta, rho, _ = _radial_parts(x, center)
        scale = np.where(rho >= r, np.where(rho > 0, rho, 1.0) ** 2, r * r)
        return -(n - 1.0) * delta / scale[:, None]

    def rho_coeff(x):
        _, rho, _ = _radial_parts(x, center)
        s = rho - r
        out = np.zeros_like(s)
        positive = s > 0
        out[positive] = (c * beta) ** (1.0 + theta - sigma) * s[positive] ** rho_exponent
        return out

    if m > 0:
        coeffs = CoefficientSet(B=drift, rho=rho_coeff, f=_const_scalar(1.0), m=m, henon_mode=True)
    else:
        # m = 0: the right-hand side is the indicator of the positivity set, a fixed source here.
        coeffs = CoefficientSet(
            B=drift,
            rho=rho_coeff,
            f=lambda x: (_radial_parts(x, center)[1] > r).astype(float),
        )

    def validity(x):
        _, rho, _ = _radial_parts(x, center)
        return (rho > r) & (rho < R)

    if constants.sigma_admissible is False:
        logger.info("henon profile: sigma=%g violates sigma <= m(2+theta)/(m+1)", sigma)
    return AnalyticProfile(
        name="henon-calibrated" if calibrated and m > 0 else "henon",
        dim=n,
        value=value,
        grad=grad,
        hess=hess,
        coeffs=coeffs,
        validity=validity,
        params={"theta": theta, "p": p, "m": m, "sigma": sigma, "r": r, "R": R},
        flags={
            "sigma_admissible": bool(constants.sigma_admissible),
            "m_admissible": constants.m_admissible,
        },
        extras={"beta_hat": beta, "c_profile": c, "x0": [float(v) for v in center]},
        singular_set=f"free boundary |x - x0| = {r}",
    )


# --- non-uniqueness ---------------------------------------------------------


def profile_nonuniqueness(
    n: int, theta: float, p: float, sigma: float
) -> Tuple[AnalyticProfile, AnalyticProfile, CoefficientSet]:
    """The trivial solution and v = c(1 - |x|^beta), c = 1/beta, with their shared coefficients."""
    if not theta < sigma < 1 + theta:
        raise ProblemSpecError(f"sigma must lie in ({theta}, {1 + theta}), got {sigma}")
    beta = (2.0 + theta) / (1.0 + theta)
    c = 1.0 / beta
    origin = np.zeros(n)

    def drift(x):
        _, rho, _ = _radial_parts(x, origin)
        return ((p - 2.0) / (1.0 + theta)) * rho[:, None] * np.atleast_2d(x)

    def rho_coeff(x):
        _, rho, _ = _radial_parts(x, origin)
        return ((n + (n - 1.0) * theta) / (1.0 + theta)) * rho ** (1.0 + theta - sigma)

    coeffs = CoefficientSet(B=drift, rho=rho_coeff, f=_const_scalar(0.0))
    params = {"theta": theta, "p": p, "m": 0.0, "sigma": sigma}

    zero = AnalyticProfile(
        name="nonuniqueness-zero",
        dim=n,
        value=_const_scalar(0.0),
        grad=lambda x: np.zeros((np.atleast_2d(x).shape[0], n)),
        hess=lambda x: np.zeros((np.atleast_2d(x).shape[0], n, n)),
        coeffs=coeffs,
        validity=lambda x: np.linalg.norm(np.atleast_2d(x), axis=1) < 1.0,
        params=dict(params),
    )

    def value(x):
        _, rho, _ = _radial_parts(x, origin)
        return c * (1.0 - rho ** beta)

    def grad(x):
        _, rho, e = _radial_parts(x, origin)
        return (-c * beta * rho ** (beta - 1.0))[:, None] * e

    @_quiet
    def hess(x):
        _, rho, e = _radial_parts(x, origin)
        return _radial_hessian(e, rho, -c * beta * rho ** (beta - 1.0), -c * beta * (beta - 1.0) * rho ** (beta - 2.0))

    v = AnalyticProfile(
        name="nonuniqueness",
        dim=n,
        value=value,
        grad=grad,
        hess=hess,
        coeffs=coeffs,
        validity=_punctured_unit_ball,
        params=dict(params),
        extras={"beta": beta, "c": c},
        singular_set="origin",
    )
    return zero, v, coeffs


# --- one-dimensional power --------------------------------------------------


def power_constant(p: float, alpha: float, theta: float) -> float:
    return (
        (1.0 + theta) ** (theta / (1.0 + theta))
        * ((1.0 + alpha) * (p - 1.0)) ** (1.0 / (1.0 + theta))
        / (2.0 + theta + alpha)
    )


def profile_power(axis: int, p: float, alpha: float, theta: float, sigma: float, n: int = 2) -> AnalyticProfile:
    """c |x_axis|^gamma, gamma = (2+alpha+theta)/(1+theta), singular on {x_axis = 0}."""
    if not 0 <= axis < n:
        raise ProblemSpecError(f"axis {axis} out of range for dimension {n}")
    if not (p > 1 and theta > 0 and alpha >= 0):
        raise ProblemSpecError("power profile needs p > 1, theta > 0, alpha >= 0")
    gamma = (2.0 + alpha + theta) / (1.0 + theta)
    c = power_constant(p, alpha, theta)
    unit = np.zeros(n)
    unit[axis] = 1.0
    rho_exponent = alpha - (1.0 + alpha) * sigma / (1.0 + theta)

    def value(x):
        return c * np.abs(np.atleast_2d(x)[:, axis]) ** gamma

    def grad(x):
        t = np.atleast_2d(x)[:, axis]
        out = np.zeros((t.size, n))
        out[:, axis] = c * gamma * np.abs(t) ** (gamma - 1.0) * np.sign(t)
        return out

    @_quiet
    def hess(x):
        t = np.atleast_2d(x)[:, axis]
        out = np.zeros((t.size, n, n))
        out[:, axis, axis] = c * gamma * (gamma - 1.0) * np.abs(t) ** (gamma - 2.0)
        return out

    def rho_coeff(x):
        t = np.abs(np.atleast_2d(x)[:, axis])
        out = np.zeros_like(t)
        nonzero = t > 0
        out[nonzero] = (c * gamma) ** (-sigma) * t[nonzero] ** rho_exponent
        return out

    def rhs(x):
        t = np.atleast_2d(x)[:, axis]
        return 2.0 * np.abs(t) ** alpha + t * np.abs(t) ** (1.0 + alpha)

    coeffs = CoefficientSet(
        B=_const_vector((c * gamma) ** (-(1.0 + theta)) * unit),
        rho=rho_coeff,
        f=rhs,
    )
    return AnalyticProfile(
        name="power",
        dim=n,
        value=value,
        grad=grad,
        hess=hess,
        coeffs=coeffs,
        validity=lambda x: np.abs(np.atleast_2d(x)[:, axis]) > 0,
        params={"theta": theta, "p": p, "m": 0.0, "sigma": sigma, "alpha": alpha, "axis": axis},
        flags={"alpha_admissible": bool(alpha >= sigma / (1.0 + theta - sigma))},
        extras={"gamma": gamma, "c": c},
        singular_set=f"{{x : x_{axis + 1} = 0}}",
    )


def power_diffusion(t: np.ndarray, p: float, alpha: float, theta: float) -> np.ndarray:
    """Closed form of |Du|^theta Delta_p^N u for the power profile off its singular set."""
    c = power_constant(p, alpha, theta)
    gamma = (2.0 + alpha + theta) / (1.0 + theta)
    t = np.abs(np.asarray(t, dtype=float))
    return (c * gamma) ** (1.0 + theta) * (p - 1.0) * (gamma - 1.0) * t ** alpha


# --- barriers ---------------------------------------------------------------


def nondeg_kappa_bound(
    theta: float,
    p: float,
    sigma: float,
    n: int,
    c0: float,
    regime: str,
    B_norm: float = 0.0,
    rho_norm: float = 0.0,
) -> float:
    """Largest kappa for which kappa|x|^beta is a strict supersolution against f = c0."""
    beta = (2.0 + theta) / (1.0 + theta)
    K = (n - 1.0) + (beta - 1.0) * (p - 1.0) + B_norm + beta ** (sigma - (1.0 + theta)) * rho_norm
    if regime == "sublinear":
        bound = c0 ** (1.0 / theta) / (beta ** ((1.0 + theta) / theta) * K ** (1.0 / theta))
    elif regime == "superlinear":
        bound = c0 ** (1.0 / (1.0 + theta)) / (beta * K ** (1.0 / (1.0 + theta)))
    else:
        raise ProblemSpecError(f"regime must be 'sublinear' or 'superlinear', got {regime!r}")
    return min(1.0, bound)


def barrier_nondeg(
    kappa: float,
    theta: float,
    p: float,
    sigma: float,
    n: int,
    c0: float,
    regime: str = "sublinear",
    B_norm: float = 0.0,
    rho_norm: float = 0.0,
) -> AnalyticProfile:
    """kappa |x|^beta, beta = (2+theta)/(1+theta), paired with f = c0 and constant drift/rho."""
    if not c0 > 0:
        raise ProblemSpecError(f"c0 must be positive, got {c0}")
    beta = (2.0 + theta) / (1.0 + theta)
    bound = nondeg_kappa_bound(theta, p, sigma, n, c0, regime, B_norm, rho_norm)
    origin = np.zeros(n)
    drift = np.zeros(n)
    drift[0] = B_norm

    def value(x):
        return kappa * np.linalg.norm(np.atleast_2d(x), axis=1) ** beta

    def grad(x):
        _, rho, e = _radial_parts(x, origin)
        return (kappa * beta * rho ** (beta - 1.0))[:, None] * e

    @_quiet
    def hess(x):
        _, rho, e = _radial_parts(x, origin)
        return _radial_hessian(e, rho, kappa * beta * rho ** (beta - 1.0), kappa * beta * (beta - 1.0) * rho ** (beta - 2.0))

    return AnalyticProfile(
        name="barrier-nondeg",
        dim=n,
        value=value,
        grad=grad,
        hess=hess,
        coeffs=CoefficientSet(B=_const_vector(drift), rho=_const_scalar(rho_norm), f=_const_scalar(c0)),
        validity=lambda x: np.linalg.norm(np.atleast_2d(x), axis=1) > 0,
        params={"theta": theta, "p": p, "m": 0.0, "sigma": sigma, "kappa": kappa, "c0": c0},
        flags={"kappa_admissible": bool(kappa <= bound)},
        extras={"beta": beta, "kappa_bound": bound, "regime": regime},
        singular_set="origin",
    )


def barrier_hopf(
    alpha_h: float,
    r: float,
    n: int = 2,
    center: Optional[Sequence[float]] = None,
    p: float = 2.0,
    theta: float = 1.0,
) -> AnalyticProfile:
    """exp(-alpha|x|^2) - exp(-alpha r^2): positive inside B_r, zero on its sphere."""
    if not (alpha_h > 0 and r > 0):
        raise ProblemSpecError(f"alpha_h and r must be positive, got {alpha_h}, {r}")
    x0 = np.zeros(n) if center is None else np.asarray(center, dtype=float).reshape(n)
    level = math.exp(-alpha_h * r * r)

    def value(x):
        delta = np.atleast_2d(x) - x0
        return np.exp(-alpha_h * np.sum(delta * delta, axis=1)) - level

    def grad(x):
        delta = np.atleast_2d(x) - x0
        weight = np.exp(-alpha_h * np.sum(delta * delta, axis=1))
        return (-2.0 * alpha_h * weight)[:, None] * delta

    @_quiet
    def hess(x):
        delta = np.atleast_2d(x) - x0
        weight = np.exp(-alpha_h * np.sum(delta * delta, axis=1))
        outer = np.einsum("ki,kj->kij", delta, delta)
        return weight[:, None, None] * (4.0 * alpha_h ** 2 * outer - 2.0 * alpha_h * np.eye(n)[None, :, :])

    threshold = 2.0 * (n + p - 2.0) / ((p - 1.0) * r * r)
    return AnalyticProfile(
        name="barrier-hopf",
        dim=n,
        value=value,
        grad=grad,
        hess=hess,
        coeffs=CoefficientSet(B=_const_vector(np.zeros(n)), rho=_const_scalar(0.0), f=_const_scalar(0.0)),
        params={"theta": theta, "p": p, "m": 0.0, "sigma": theta + 0.5, "alpha_h": alpha_h, "r": r},
        flags={"strict_subsolution_on_annulus": bool(alpha_h > threshold)},
        extras={"slope_at_sphere": 2.0 * alpha_h * r * level, "alpha_threshold": threshold},
    )


# --- closed-form exponents ---------------------------------------------------


def sharp_exponent(p: float) -> float:
    """k + alpha_sharp from the planar p-Poisson regularity formula."""
    q = 1.0 / (p - 1.0)
    return (7.0 + q + math.sqrt(1.0 + 14.0 * q + q * q)) / 6.0


def alpha_star(p: float) -> float:
    q = 1.0 / (p - 1.0)
    return (-3.0 - q + math.sqrt(33.0 + 30.0 * q + q * q)) / (2.0 * p)


def reference_exponents(p: float, theta: float) -> ReferenceExponents:
    if not p > 1:
        raise ProblemSpecError(f"p must be > 1, got {p}")
    lam, Lam = pucci_bounds(p)
    k_alpha = sharp_exponent(p)
    return ReferenceExponents(
        p=float(p),
        theta=float(theta),
        p_prime=1.0 + 1.0 / (p - 1.0),
        lambda_min=lam,
        lambda_max=Lam,
        sharp_exponent=k_alpha,
        alpha_sharp=k_alpha - 1.0,
        alpha_star=alpha_star(p),
        critical_growth=1.0 + 1.0 / (1.0 + theta),
        planar_meaningful=bool(p > 2),
    )


# --- registry and problem assembly -------------------------------------------


PROFILE_NAMES = (
    "henon",
    "henon-absorption",
    "henon-calibrated",
    "nonuniqueness",
    "power",
    "barrier-nondeg",
    "barrier-hopf",
)


def build_profile(name: str, params: Optional[Dict[str, object]] = None, n: int = 2) -> AnalyticProfile:
    """Build a registry profile from a parameter dict, filling documented defaults."""
    params = dict(params or {})

    def num(key: str, default: float) -> float:
        return float(params.get(key, default))

    if name in ("henon", "henon-absorption", "henon-calibrated"):
        m_default = 0.0 if name == "henon" else 0.5
        return profile_henon(
            n,
            theta=num("theta", 1.0),
            p=num("p", 2.0),
            m=num("m", m_default),
            sigma=num("sigma", 1.5),
            r=num("r", 0.25),
            R=num("R", 1.0),
            x0=params.get("x0"),
            calibrated=bool(params.get("calibrated", name == "henon-calibrated")),
        )
    if name == "nonuniqueness":
        return profile_nonuniqueness(n, num("theta", 1.0), num("p", 2.0), num("sigma", 1.5))[1]
    if name == "power":
        theta, sigma = num("theta", 1.0), num("sigma", 1.5)
        return profile_power(
            int(params.get("axis", 0)),
            num("p", 2.0),
            num("alpha", sigma / (1.0 + theta - sigma)),
            theta,
            sigma,
            n=n,
        )
    if name == "barrier-nondeg":
        theta, p, sigma, c0 = num("theta", 1.0), num("p", 2.0), num("sigma", 1.5), num("c0", 1.0)
        regime = str(params.get("regime", "sublinear"))
        B_norm, rho_norm = num("B_norm", 0.0), num("rho_norm", 0.0)
        bound = nondeg_kappa_bound(theta, p, sigma, n, c0, regime, B_norm, rho_norm)
        kappa = num("kappa", 0.5 * bound)
        return barrier_nondeg(kappa, theta, p, sigma, n, c0, regime, B_norm, rho_norm)
    if name == "barrier-hopf":
        p, r = num("p", 2.0), num("r", 0.5)
        threshold = 2.0 * (n + p - 2.0) / ((p - 1.0) * r * r)
        return barrier_hopf(num("alpha_h", 2.0 * threshold), r, n=n, center=params.get("x0"), p=p, theta=num("theta", 1.0))
    raise ProblemSpecError(f"unknown profile {name!r}; choose from {', '.join(PROFILE_NAMES)}")


def sample_coefficients(coeffs: CoefficientSet, grid: Grid) -> Tuple[VectorField, ScalarField, ScalarField, Optional[ScalarField]]:
    B = sample_vector(coeffs.B, grid, tag="B")
    rho = sample(coeffs.rho, grid, tag="rho")
    f = sample(coeffs.f, grid, tag="f")
    c = sample(coeffs.c, grid, tag="c") if coeffs.c is not None else None
    return B, rho, f, c


def profile_problem(
    profile: AnalyticProfile,
    grid: Grid,
    g: Optional[PointFn] = None,
) -> ProblemSpec:
    """ProblemSpec pairing a profile with its own coefficients; g defaults to the profile itself."""
    if profile.coeffs is None:
        raise ProblemSpecError(f"profile {profile.name} carries no coefficients")
    B, rho, f, c = sample_coefficients(profile.coeffs, grid)
    theta = float(profile.params["theta"])
    sigma = float(profile.params["sigma"])
    return ProblemSpec(
        p=float(profile.params["p"]),
        theta=theta,
        sigma=sigma,
        B_field=B,
        rho_field=rho,
        f_field=f,
        g_boundary=g or profile.value,
        m=profile.coeffs.m,
        henon_mode=profile.coeffs.henon_mode,
        regime_override=not (theta < sigma < theta + 1.0),
        c_field=c,
    )
