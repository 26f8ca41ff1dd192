import numpy as np
import pytest

from core.config import parse_experiment_config
from core.errors import ConfigError
from core.experiment import bracket_fields, build_experiment, resolve_x0
from lattice.grid import boundary_values, sample
from pde.operators import SuperEnvelope

BASE = """\
[problem]
p = 2
theta = 1
sigma = 1.5
{problem}

[coefficients]
{coefficients}

[grid]
dim = 2
h = 0.125

{extra}
"""


def _config(problem="", coefficients="g = 1 + 2*x - 0.5*y", extra=""):
    return parse_experiment_config(BASE.format(problem=problem, coefficients=coefficients, extra=extra))


def test_coefficients_are_sampled():
    experiment = build_experiment(_config(coefficients="B = 0.5, 0\nrho = 2\nf = x\ng = 0"))
    grid = experiment.grid
    assert np.allclose(experiment.spec.B_field.values, [0.5, 0.0])
    assert np.all(experiment.spec.rho_field.values == 2.0)
    assert np.allclose(experiment.spec.f_field.values, grid.coords()[:, 0])
    assert experiment.spec.c_field is None
    assert experiment.profile is None


def test_solver_block_flows_into_solver_config():
    extra = "[solver]\nenvelope = super\ntol = 1e-6\ndegeneracy = central\n"
    experiment = build_experiment(_config(extra=extra), workers=3)
    assert isinstance(experiment.solver.envelope, SuperEnvelope)
    assert experiment.solver.tol == 1e-6
    assert experiment.solver.degeneracy == "central"
    assert experiment.solver.workers == 3


def test_profile_coefficients_and_boundary():
    extra = "[profile]\nname = henon-calibrated\nr = 0.25\n"
    coefficients = "B = profile\nrho = profile\nf = profile\ng = profile"
    experiment = build_experiment(_config(problem="m = 0.5", coefficients=coefficients, extra=extra))
    spec = experiment.spec
    assert spec.henon_mode
    assert spec.m == 0.5
    assert experiment.profile.name == "henon-calibrated"
    points = experiment.grid.coords(experiment.grid.boundary)
    assert np.allclose(spec.g_boundary(points), experiment.profile.value(points))


def test_profile_without_coefficient_is_rejected():
    extra = "[profile]\nname = power\n"
    with pytest.raises(ConfigError):
        build_experiment(_config(coefficients="c = profile\ng = 0", extra=extra))


def test_weight_multiplies_source():
    extra = "[analysis]\nweight_alpha = 2\n"
    experiment = build_experiment(_config(coefficients="f = 1\ng = 0", extra=extra))
    coords = experiment.grid.coords()
    assert np.allclose(experiment.spec.f_field.values, np.sum(coords * coords, axis=1))


def test_invalid_problem_is_config_error():
    with pytest.raises(ConfigError):
        build_experiment(parse_experiment_config(BASE.replace("p = 2", "p = 1").format(problem="", coefficients="", extra="")))


def test_constant_bracket_encloses_boundary_data():
    experiment = build_experiment(_config(extra="[solver]\nbracket = constant\nbracket_margin = 0.5\n"))
    lower, upper = bracket_fields(experiment)
    pinned = boundary_values(experiment.grid, experiment.spec.g_boundary, experiment.solver.boundary_eval)
    bound = np.max(np.abs(pinned)) + 0.5
    assert np.all(lower.values == -bound)
    assert np.all(upper.values == bound)


def test_constant_bracket_is_nonnegative_for_henon():
    experiment = build_experiment(
        _config(problem="m = 0.5\nhenon_mode = true", coefficients="f = 1\ng = 1", extra="[solver]\nbracket = constant\n")
    )
    lower, upper = bracket_fields(experiment)
    assert np.all(lower.values == 0.0)
    assert np.all(upper.values == 2.0)


def test_no_bracket_and_barrier_requirements():
    assert bracket_fields(build_experiment(_config())) is None
    with pytest.raises(ConfigError):
        bracket_fields(build_experiment(_config(extra="[solver]\nbracket = barriers\n")))


def test_resolve_x0():
    experiment = build_experiment(_config())
    u = sample(lambda x: np.sum((x - 0.25) ** 2, axis=1), experiment.grid)
    assert resolve_x0(u, "argmin") == pytest.approx([0.25, 0.25])
    assert resolve_x0(u, "center") == pytest.approx([0.0, 0.0])
    assert resolve_x0(u, (0.5, -0.5)) == pytest.approx([0.5, -0.5])
    with pytest.raises(ConfigError):
        resolve_x0(u, (0.5,))
