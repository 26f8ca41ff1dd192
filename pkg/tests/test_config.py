from pathlib import Path

import pytest

from core.config import (
    build_config,
    config_summary,
    load_experiment_config,
    parse_experiment_config,
)
from core.errors import ConfigError, ExpressionError

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

MINIMAL = """\
[problem]
p = 3
theta = 1
sigma = 1.5

[grid]
dim = 2
h = 0.0625
"""


def test_build_config_paths(tmp_path):
    config = build_config(tmp_path)
    assert config.log_dir == tmp_path / "logs"
    assert config.config_dir == tmp_path / "configs"


def test_resolve_config_falls_back_to_bundled(tmp_path, monkeypatch):
    app = build_config(tmp_path)
    bundled = tmp_path / "configs" / "smp.ini"
    bundled.parent.mkdir()
    bundled.write_text(MINIMAL)
    local = tmp_path / "work" / "mine.ini"
    local.parent.mkdir()
    local.write_text(MINIMAL)
    monkeypatch.chdir(local.parent)
    assert app.resolve_config("mine.ini") == Path("mine.ini")
    assert app.resolve_config("smp.ini") == bundled
    assert app.resolve_config("smp") == bundled
    assert app.resolve_config("missing.ini") == Path("missing.ini")


def test_minimal_config_defaults():
    config = parse_experiment_config(MINIMAL)
    problem = config.problem
    assert (problem.p, problem.theta, problem.sigma, problem.m) == (3.0, 1.0, 1.5, 0.0)
    assert config.grid.center == (0.0, 0.0)
    assert config.grid.radius == 1.0
    assert config.coefficients.g.value == "0"
    assert config.coefficients.c is None
    assert config.solver.envelope == "regularized"
    assert config.solver.bracket == "none"
    assert config.analysis.radii == (0.25, 0.125, 0.0625, 0.03125)
    assert config.output.formats == ("json", "csv")
    assert config.profile.name is None


def test_unknown_key_names_key_and_line():
    text = MINIMAL + "\n[solver]\ntol = 1e-6\ntolerance = 1e-6\n"
    with pytest.raises(ConfigError) as info:
        parse_experiment_config(text)
    assert info.value.key == "tolerance"
    assert info.value.lineno == 12
    assert "line 12" in str(info.value)
    assert "tolerance" in str(info.value)


def test_unknown_section():
    with pytest.raises(ConfigError) as info:
        parse_experiment_config(MINIMAL + "\n[plots]\ncolor = red\n")
    assert info.value.lineno == 10


def test_missing_required_key():
    with pytest.raises(ConfigError, match="sigma"):
        parse_experiment_config(MINIMAL.replace("sigma = 1.5\n", ""))


@pytest.mark.parametrize(
    "extra",
    [
        "[solver]\nenvelope = lower\n",
        "[solver]\nmax_iters = many\n",
        "[solver]\nupwind = perhaps\n",
        "[analysis]\nradii = 0.5, -0.25\n",
        "[output]\nformats = json, xml\n",
    ],
)
def test_bad_values_are_config_errors(extra):
    with pytest.raises(ConfigError) as info:
        parse_experiment_config(MINIMAL + "\n" + extra)
    assert info.value.lineno is not None


def test_duplicate_key_is_reported():
    with pytest.raises(ConfigError) as info:
        parse_experiment_config(MINIMAL + "h = 0.125\n")
    assert info.value.key == "h"


def test_expressions_and_comments():
    text = MINIMAL + "\n[coefficients]\nB = x, -y   # rotation-free drift\nrho = 0\nf = abs(x)\ng = 1 + r\n"
    config = parse_experiment_config(text)
    assert config.coefficients.B.value == "x, -y"
    assert config.coefficients.f.lineno == 13


def test_frak_f_alias():
    config = parse_experiment_config(MINIMAL + "\n[coefficients]\nfrak_f = 2\n")
    assert config.coefficients.f.value == "2"
    with pytest.raises(ConfigError):
        parse_experiment_config(MINIMAL + "\n[coefficients]\nf = 1\nfrak_f = 2\n")


def test_dyadic_radii_and_point():
    config = parse_experiment_config(MINIMAL + "\n[analysis]\nradii = dyadic 1 3\nx0 = 0.25, 0\nmode = both\n")
    assert config.analysis.radii == (0.5, 0.25, 0.125)
    assert config.analysis.x0 == (0.25, 0.0)
    assert config.analysis.mode == "both"


def test_profile_reference_needs_profile_name():
    with pytest.raises(ConfigError) as info:
        parse_experiment_config(MINIMAL + "\n[coefficients]\ng = profile\n")
    assert info.value.key == "g"


def test_center_broadcast_and_length_check():
    assert parse_experiment_config(MINIMAL.replace("h = 0.0625", "h = 0.0625\ncenter = 0.5")).grid.center == (0.5, 0.5)
    with pytest.raises(ConfigError):
        parse_experiment_config(MINIMAL.replace("h = 0.0625", "h = 0.0625\ncenter = 0, 0, 0"))


def test_missing_file_is_config_error(tmp_path):
    with pytest.raises(ConfigError):
        load_experiment_config(tmp_path / "absent.ini")


@pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("*.ini")), ids=lambda p: p.stem)
def test_shipped_configs_parse(path):
    config = load_experiment_config(path)
    assert config.path == path
    assert config.output.directory
    assert config_summary(config)[0].startswith("Problem:")


def test_expression_errors_keep_line(tmp_path):
    from core.experiment import build_experiment

    path = tmp_path / "bad.ini"
    path.write_text(MINIMAL + "\n[coefficients]\nf = sin(x)\n", encoding="utf-8")
    with pytest.raises(ExpressionError) as info:
        build_experiment(load_experiment_config(path))
    assert info.value.lineno == 11
