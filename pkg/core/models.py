from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple


@dataclass
class SolveReport:
    iterations: int
    final_residual: float
    converged: bool
    wall_seconds: float
    history: List[Tuple[int, float, float]] = field(default_factory=list)
    initial_residual: float = 0.0
    flags: List[str] = field(default_factory=list)


@dataclass
class FitResult:
    exponent: float
    log_intercept: float
    r_squared: float
    radii: List[float]
    samples: List[Tuple[float, float]]
    dropped: int = 0
    constant: Optional[float] = None
    target: Optional[float] = None


@dataclass(frozen=True)
class HenonConstants:
    beta_hat: float
    c_profile: float
    sigma_admissible: Optional[bool]
    m_admissible: bool


@dataclass(frozen=True)
class ReferenceExponents:
    p: float
    theta: float
    p_prime: float
    lambda_min: float
    lambda_max: float
    sharp_exponent: float
    alpha_sharp: float
    alpha_star: float
    critical_growth: float
    planar_meaningful: bool


@dataclass
class PositivityReport:
    classification: str
    tol: float
    min_interior: float
    sup_abs: float
    dead_core: List[int] = field(default_factory=list)
    free_boundary_cells: List[Tuple[int, ...]] = field(default_factory=list)

    @property
    def dead_core_count(self) -> int:
        return len(self.dead_core)


@dataclass
class ProbeReport:
    node: int
    magnitude: float
    center_delta: float
    neighbor_deltas: Dict[Tuple[int, ...], float]
    monotone: bool
    violations: List[Tuple[int, ...]] = field(default_factory=list)


@dataclass
class Discrepancy:
    profile: str
    node: int
    coords: List[float]
    residual: float
    h: float


@dataclass
class ProfileVerdict:
    profile: str
    verdict: str
    spacings: List[float]
    sup_residuals: List[float]
    order: Optional[float]
    rule: str
    notes: Dict[str, object] = field(default_factory=dict)
    discrepancies: List[Discrepancy] = field(default_factory=list)


@dataclass
class RunSummary:
    run_id: int
    command: str
    started_at: str
    finished_at: str
    total_time_seconds: float
    outcome: Dict[str, object] = field(default_factory=dict)
