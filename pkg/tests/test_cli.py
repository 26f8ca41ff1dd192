from pathlib import Path

import pandas as pd
import pytest

import main
from core.errors import EXIT_CONFIG, EXIT_OK
from run_logging.artifacts import read_json

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def run(*argv):
    return main.main([str(a) for a in argv])


def test_no_command_prints_help(capsys):
    assert run() == EXIT_CONFIG
    assert "verify-profiles" in capsys.readouterr().out


def test_reference_exponents_table(tmp_path):
    assert run("reference-exponents", "--p", 2, 3, 4, "--out", tmp_path) == EXIT_OK
    frame = pd.read_csv(tmp_path / "reference_exponents.csv")
    assert frame["p"].tolist() == [2.0, 3.0, 4.0]
    row = frame.set_index("p").loc[3.0]
    assert row["p_prime"] == pytest.approx(1.5, abs=1e-12)
    assert row["Lambda"] == 2.0
    assert row["alpha_sharp"] + 1.0 == pytest.approx(1.72871, abs=1e-5)
    assert frame.set_index("p").loc[2.0, "alpha_star"] == pytest.approx(1.0, abs=1e-12)


def test_unknown_key_exits_with_config_status(tmp_path, capsys):
    path = tmp_path / "broken.ini"
    path.write_text("[problem]\np = 2\ntheta = 1\nsigma = 1.5\nstrength = 3\n\n[grid]\ndim = 2\nh = 0.125\n")
    assert run("solve", "--config", path, "--out", tmp_path / "out", "--log-dir", tmp_path / "logs") == EXIT_CONFIG
    out = capsys.readouterr().out
    assert "strength" in out
    assert "line 5" in out


def test_missing_config_and_bad_threads(tmp_path):
    assert run("solve", "--log-dir", tmp_path) == EXIT_CONFIG
    assert run("solve", "--config", tmp_path / "absent.ini") == EXIT_CONFIG
    assert run("solve", "--config", CONFIG_DIR / "affine.ini", "--threads", 0) == EXIT_CONFIG


def test_unknown_selector(tmp_path):
    assert run("verify-profiles", "catenoid", "--out", tmp_path) == EXIT_CONFIG


def test_affine_solve_and_residual_check(tmp_path):
    out = tmp_path / "affine"
    logs = tmp_path / "logs"
    assert run("solve", "--config", CONFIG_DIR / "affine.ini", "--out", out, "--log-dir", logs) == EXIT_OK
    report = read_json(out / "report.json")
    assert report["converged"] is True
    assert report["envelope"] == "regularized"
    assert "threads" not in report
    assert (out / "solution.bin").exists()
    assert (out / "iterations.txt").read_text().startswith("iteration residual dt\n")
    assert not (out / "dead_core.json").exists()
    assert (logs / "solve" / "run_0001" / "summary.json").exists()

    assert run("residual-check", "--config", CONFIG_DIR / "affine.ini", "--out", out, "--log-dir", logs) == EXIT_OK
    check = read_json(out / "residual_check.json")
    assert set(check["sup_residual"]) == {"regularized", "sub", "super"}
    assert max(check["sup_residual"].values()) < 1e-8


def test_affine_rerun_is_byte_identical(tmp_path):
    for name, threads in (("one", 1), ("four", 4)):
        args = ("solve", "--config", CONFIG_DIR / "affine.ini", "--out", tmp_path / name, "--threads", threads)
        assert run(*args, "--log-dir", tmp_path / "logs") == EXIT_OK
    for artifact in ("solution.bin", "solution.json", "report.json", "iterations.txt"):
        assert (tmp_path / "one" / artifact).read_bytes() == (tmp_path / "four" / artifact).read_bytes()


def test_power_profile_exponent(tmp_path, capsys):
    out = tmp_path / "power"
    code = run("exponent", "--config", CONFIG_DIR / "power_profile.ini", "--out", out, "--log-dir", tmp_path / "logs")
    assert code == EXIT_OK
    fit = read_json(out / "growth.json")
    assert fit["exponent"] == pytest.approx(1.5, abs=0.02)
    assert fit["target"] == pytest.approx(1.5)
    assert fit["source"] == "profile"
    assert (out / "growth.csv").exists()
    assert "exponent=1.5" in capsys.readouterr().out


def test_residual_check_rejects_foreign_grid(tmp_path):
    out = tmp_path / "affine"
    assert run("solve", "--config", CONFIG_DIR / "affine.ini", "--out", out, "--log-dir", tmp_path / "logs") == EXIT_OK
    coarse = tmp_path / "coarse.ini"
    coarse.write_text((CONFIG_DIR / "affine.ini").read_text().replace("h = 0.015625", "h = 0.125"))
    code = run("residual-check", "--config", coarse, "--solution", out / "solution.bin", "--log-dir", tmp_path / "logs")
    assert code == EXIT_CONFIG


def test_verify_single_profile(tmp_path, capsys):
    assert run("verify-profiles", "barrier-nondeg", "--out", tmp_path) == EXIT_OK
    summary = read_json(tmp_path / "verify_profiles.json")
    assert summary["passed"] == 1
    assert summary["profiles"][0]["verdict"] == "PASS"
    assert (tmp_path / "residuals.csv").exists()
    assert "barrier-nondeg" in capsys.readouterr().out
