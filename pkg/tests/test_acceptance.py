"""End-to-end runs at the resolutions used for the headline numbers.

These take minutes; run them with ``pytest -m slow``.
"""

from pathlib import Path

import numpy as np
import pytest

import main
from analysis.regularity import STRICTLY_POSITIVE, hopf_slope, positivity_report
from core.config import load_experiment_config
from core.experiment import build_experiment
from lattice.grid import VectorField, build_grid, constant_field, sample
from pde.operators import ProblemSpec
from pde.profiles import barrier_hopf
from run_logging.artifacts import load_solution, read_json
from solver.dirichlet import SolverConfig, comparison_check, solve_dirichlet

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

pytestmark = pytest.mark.slow


def run(*argv):
    return main.main([str(a) for a in argv])


def _artifacts(directory: Path):
    return {p.relative_to(directory): p.read_bytes() for p in sorted(directory.rglob("*")) if p.is_file()}


def test_critical_growth_and_nondegeneracy(tmp_path):
    out = tmp_path / "critical"
    assert run("exponent", "--config", CONFIG_DIR / "critical_growth.ini", "--out", out, "--log-dir", tmp_path / "logs") == 0
    growth = read_json(out / "growth.json")
    assert growth["exponent"] == pytest.approx(1.5, abs=0.1)
    curve = read_json(out / "nondegeneracy.json")
    assert curve["target"] == 1.5
    assert curve["constant"] > 0.0
    assert read_json(out / "regularity.json")["seminorm"] > 0.0


def test_henon_free_boundary(tmp_path):
    out = tmp_path / "henon"
    assert run("exponent", "--config", CONFIG_DIR / "henon_free_boundary.ini", "--out", out, "--log-dir", tmp_path / "logs") == 0
    growth = read_json(out / "growth.json")
    assert growth["exponent"] == pytest.approx(2.0, abs=0.15)
    dead_core = read_json(out / "dead_core.json")
    assert dead_core["classification"] == "mixed"
    assert dead_core["relative_error"] <= 0.1
    assert read_json(out / "report.json")["converged"] is True

    u = load_solution(out / "solution.bin")
    grid = u.grid
    h = grid.spacing
    interior = grid.interior
    core = interior[np.linalg.norm(grid.coords(interior), axis=1) <= 0.25 - 2.0 * h]
    assert core.size > 0
    assert np.all(u.values[core] <= h * h)


def test_comparison_over_random_draws():
    grid = build_grid(2, 1.0 / 16.0, (0.0, 0.0), 1.0)
    cfg = SolverConfig(tol=1e-9, max_iters=200_000, boundary_eval="nodal")
    rng = np.random.default_rng(2024)
    for _ in range(20):
        angle = rng.uniform(0.0, 2.0 * np.pi)
        slope = rng.uniform(0.5, 1.5) * np.array([np.cos(angle), np.sin(angle)])
        lift = rng.uniform(0.05, 0.5)

        def g1(x, slope=slope):
            return 1.0 + x @ slope

        def g2(x, slope=slope, lift=lift):
            return g1(x, slope) + lift * (1.0 + x[:, 0] ** 2)

        common = dict(
            p=float(rng.choice([1.5, 2.0, 3.0])),
            theta=1.0,
            sigma=1.5,
            B_field=VectorField(grid, rng.uniform(-0.5, 0.5, size=2)),
            rho_field=constant_field(grid, rng.uniform(0.0, 0.5)),
            f_field=constant_field(grid, rng.uniform(0.0, 0.5)),
        )
        u1, r1 = solve_dirichlet(ProblemSpec(g_boundary=g1, **common), grid, cfg)
        u2, r2 = solve_dirichlet(ProblemSpec(g_boundary=g2, **common), grid, cfg)
        assert r1.converged and r2.converged
        scale = max(u1.sup_norm(), u2.sup_norm())
        assert comparison_check(u1, u2) <= 1e-6 * scale


def test_strong_maximum_principle_run(tmp_path):
    out = tmp_path / "smp"
    assert run("solve", "--config", CONFIG_DIR / "smp.ini", "--out", out, "--log-dir", tmp_path / "logs") == 0
    u = load_solution(out / "solution.bin")
    pinned = u.values[u.grid.boundary]
    assert np.min(pinned) == 0.0 and np.max(pinned) > 0.0
    report = positivity_report(u, 1e-10)
    assert report.classification == STRICTLY_POSITIVE


def test_hopf_slope_of_exponential_barrier():
    alpha, r = 1.0, 0.5
    grid = build_grid(2, 1.0 / 128.0, (0.0, 0.0), 1.0)
    u = sample(barrier_hopf(alpha, r).value, grid)
    slope = hopf_slope(u, (r, 0.0), (0.0, 0.0), r, depth=0.05 * r)
    assert slope == pytest.approx(2.0 * alpha * r * np.exp(-alpha * r * r), rel=0.1)


@pytest.mark.parametrize("name", ["critical_growth", "henon_free_boundary"])
def test_thread_count_does_not_change_artifacts(tmp_path, name):
    outputs = []
    for threads in (1, 8):
        out = tmp_path / f"{name}-{threads}"
        code = run("exponent", "--config", CONFIG_DIR / f"{name}.ini", "--out", out,
                   "--threads", threads, "--log-dir", tmp_path / "logs")
        assert code == 0
        outputs.append(_artifacts(out))
    assert outputs[0].keys() == outputs[1].keys()
    for key in outputs[0]:
        assert outputs[0][key] == outputs[1][key], key


def test_configured_dead_core_matches_profile():
    config = load_experiment_config(CONFIG_DIR / "henon_free_boundary.ini")
    experiment = build_experiment(config)
    assert experiment.spec.henon_mode
    assert experiment.profile.extras["beta_hat"] == pytest.approx(2.0)
