import json

import numpy as np
import pandas as pd
import pytest

from core.errors import ArtifactError
from core.models import Discrepancy, FitResult, ProfileVerdict, SolveReport
from lattice.grid import build_grid, sample
from analysis.regularity import positivity_report
from pde.profiles import reference_exponents
from run_logging.artifacts import (
    REFERENCE_COLUMNS,
    SCHEMA_VERSION,
    load_solution,
    read_json,
    reference_frame,
    save_solution,
    to_jsonable,
    write_dead_core,
    write_fit,
    write_iteration_log,
    write_json,
    write_solve_report,
    write_verdicts,
)


def _report():
    return SolveReport(
        iterations=2000,
        final_residual=3.5e-9,
        converged=True,
        wall_seconds=12.5,
        history=[(0, 1.0, 0.0), (1000, 1e-4, 2e-5), (2000, 3.5e-9, 2e-5)],
        initial_residual=1.0,
    )


def test_solution_reload_is_bitwise(tmp_path, unit_grid):
    u = sample(lambda x: np.sin(x[:, 0]) * np.exp(x[:, 1]) / 3.0, unit_grid, tag="solution")
    binary = save_solution(u, tmp_path)
    assert binary.stat().st_size == 8 * unit_grid.size
    meta = read_json(tmp_path / "solution.json")
    assert meta["schema_version"] == SCHEMA_VERSION
    assert meta["grid"]["h"] == unit_grid.spacing
    restored = load_solution(tmp_path / "solution.json")
    assert restored.grid.same_as(unit_grid)
    assert np.array_equal(restored.values, u.values)


def test_truncated_solution_is_rejected(tmp_path, coarse_grid):
    u = sample(lambda x: x[:, 0], coarse_grid)
    binary = save_solution(u, tmp_path)
    binary.write_bytes(binary.read_bytes()[:-8])
    with pytest.raises(ArtifactError):
        load_solution(binary)


def test_tampered_sidecar_is_rejected(tmp_path, coarse_grid):
    save_solution(sample(lambda x: x[:, 0], coarse_grid), tmp_path)
    sidecar = tmp_path / "solution.json"
    meta = json.loads(sidecar.read_text())
    meta["grid"]["extent"] = [5, 5]
    sidecar.write_text(json.dumps(meta))
    with pytest.raises(ArtifactError):
        load_solution(sidecar)


def test_missing_artifacts(tmp_path):
    with pytest.raises(ArtifactError):
        load_solution(tmp_path / "nothing.bin")
    with pytest.raises(FileNotFoundError):
        read_json(tmp_path / "nothing.json")


def test_json_conversion():
    payload = to_jsonable({"a": np.float64(1.5), "b": float("nan"), "c": np.arange(3), 4: (np.bool_(True),)})
    assert payload == {"a": 1.5, "b": None, "c": [0, 1, 2], "4": [True]}


def test_solve_report_has_no_wall_time(tmp_path):
    path = write_solve_report(tmp_path / "report.json", _report(), extra={"envelope": "regularized"})
    document = read_json(path)
    assert document["kind"] == "solve_report"
    assert document["converged"] is True
    assert document["envelope"] == "regularized"
    assert "wall_seconds" not in document


def test_iteration_log_round_trips_floats(tmp_path):
    path = write_iteration_log(tmp_path / "iterations.txt", _report())
    lines = path.read_text().splitlines()
    assert lines[0] == "iteration residual dt"
    it, res, dt = lines[2].split()
    assert (int(it), float(res), float(dt)) == (1000, 1e-4, 2e-5)


def test_rewriting_is_byte_identical(tmp_path):
    first = write_json(tmp_path / "a.json", {"x": 0.1 + 0.2, "values": [1 / 3]}).read_bytes()
    second = write_json(tmp_path / "a.json", {"x": 0.1 + 0.2, "values": [1 / 3]}).read_bytes()
    assert first == second


def test_fit_writes_json_and_plot_data(tmp_path):
    fit = FitResult(1.5, 0.1, 0.999, [0.25, 0.125], [(0.25, 0.125), (0.125, 0.0442)], target=1.5)
    json_path, csv_path = write_fit(tmp_path, "growth_fit", fit, extra={"x0": [0.0, 0.0]})
    document = read_json(json_path)
    assert document["exponent"] == 1.5
    assert document["x0"] == [0.0, 0.0]
    frame = pd.read_csv(csv_path)
    assert list(frame.columns) == ["r", "value"]
    assert frame["value"].tolist() == [0.125, 0.0442]


def test_reference_frame_columns():
    frame = reference_frame([reference_exponents(p, 1.0) for p in (2.0, 3.0)])
    assert list(frame.columns) == REFERENCE_COLUMNS
    assert frame["alpha_star"].iloc[0] == pytest.approx(1.0)


def test_dead_core_document(tmp_path):
    grid = build_grid(2, 1.0 / 32.0, (0.0, 0.0), 1.0)
    u = sample(lambda x: np.maximum(np.linalg.norm(x, axis=1) - 0.25, 0.0) ** 2, grid)
    report = positivity_report(u, 1e-10)
    document = read_json(write_dead_core(tmp_path / "dead_core.json", report, grid, exact_count=report.dead_core_count))
    assert document["classification"] == "mixed"
    assert document["relative_error"] == 0.0
    assert document["h"] == grid.spacing


def test_verdicts_summary_and_table(tmp_path):
    verdicts = [
        ProfileVerdict("henon", "PASS", [0.02, 0.01], [4e-4, 1e-4], 2.0, "observed order >= 1"),
        ProfileVerdict(
            "power",
            "DISCREPANCY",
            [0.02, 0.01],
            [3.0, 3.0],
            0.0,
            "observed order >= 1",
            discrepancies=[Discrepancy("power", 17, [0.5, 0.1], -3.0, 0.01)],
        ),
    ]
    json_path, csv_path = write_verdicts(tmp_path, verdicts)
    summary = read_json(json_path)
    assert (summary["passed"], summary["discrepancies"]) == (1, 1)
    assert summary["profiles"][1]["discrepancies"][0]["node"] == 17
    assert len(pd.read_csv(csv_path)) == 4
