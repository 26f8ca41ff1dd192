"""Output artifacts: solution fields, reports and tables.

Every JSON document carries ``schema_version``. Floats go through ``repr``
(shortest round-trip form) in JSON and ``%.17g`` in CSV, so reruns of the
same configuration produce byte-identical files.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd

from core.errors import ArtifactError
from core.models import FitResult, PositivityReport, ProfileVerdict, ReferenceExponents, SolveReport
from lattice.grid import Grid, ScalarField, build_grid

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
FLOAT_FORMAT = "%.17g"
SOLUTION_DTYPE = "<f8"


def to_jsonable(value):
    """Plain Python containers with numpy scalars unwrapped and non-finite floats as None."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, Path):
        return str(value)
    return value


def write_json(path: Path, payload: Dict[str, object]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    document = {"schema_version": SCHEMA_VERSION}
    document.update(payload)
    path.write_text(json.dumps(to_jsonable(document), indent=2) + "\n", encoding="utf-8")
    return path


def read_json(path: Path) -> Dict[str, object]:
    path = Path(path)
    if not path.exists():
        raise ArtifactError(f"missing artifact {path}")
    return json.loads(path.read_text(encoding="utf-8"))


def write_csv(path: Path, frame: pd.DataFrame) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


# --- solution fields --------------------------------------------------------


def save_solution(u: ScalarField, directory: Path, stem: str = "solution") -> Path:
    """Write ``<stem>.bin`` (little-endian doubles, row-major) and ``<stem>.json``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    binary = directory / f"{stem}.bin"
    np.asarray(u.values, dtype=SOLUTION_DTYPE).tofile(binary)
    write_json(
        directory / f"{stem}.json",
        {
            "kind": "solution",
            "tag": u.tag,
            "dtype": SOLUTION_DTYPE,
            "order": "C",
            "count": int(u.grid.size),
            "binary": binary.name,
            "grid": u.grid.metadata(),
        },
    )
    return binary


def load_solution(path: Path) -> ScalarField:
    """Reload a field written by save_solution; ``path`` may name the .bin or the .json."""
    path = Path(path)
    sidecar = path.with_suffix(".json")
    binary = path.with_suffix(".bin")
    if not sidecar.exists() or not binary.exists():
        raise ArtifactError(f"missing solution artifact {binary} (+ sidecar {sidecar.name})")
    meta = read_json(sidecar)
    try:
        grid_meta = meta["grid"]
        grid = build_grid(int(grid_meta["dim"]), float(grid_meta["h"]), grid_meta["center"], float(grid_meta["radius"]))
    except (KeyError, TypeError) as exc:
        raise ArtifactError(f"malformed solution sidecar {sidecar}: {exc}") from None
    if grid.metadata() != grid_meta:
        raise ArtifactError(f"sidecar {sidecar} describes a lattice that does not match its own grid parameters")
    values = np.fromfile(binary, dtype=meta.get("dtype", SOLUTION_DTYPE))
    if values.size != grid.size:
        raise ArtifactError(f"{binary} holds {values.size} values, grid has {grid.size} nodes")
    return ScalarField(grid, values.astype(float), tag=str(meta.get("tag", "solution")))


# --- reports ----------------------------------------------------------------


def solve_report_payload(report: SolveReport) -> Dict[str, object]:
    return {
        "iterations": report.iterations,
        "initial_residual": report.initial_residual,
        "final_residual": report.final_residual,
        "converged": report.converged,
        "flags": list(report.flags),
    }


def write_solve_report(path: Path, report: SolveReport, extra: Optional[Dict[str, object]] = None) -> Path:
    payload: Dict[str, object] = {"kind": "solve_report"}
    payload.update(solve_report_payload(report))
    if extra:
        payload.update(extra)
    return write_json(path, payload)


def write_iteration_log(path: Path, report: SolveReport) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["iteration residual dt"]
    lines += [f"{it} {FLOAT_FORMAT % res} {FLOAT_FORMAT % dt}" for it, res, dt in report.history]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def fit_payload(fit: FitResult) -> Dict[str, object]:
    return {
        "exponent": fit.exponent,
        "log_intercept": fit.log_intercept,
        "r_squared": fit.r_squared,
        "radii": list(fit.radii),
        "samples": [[r, v] for r, v in fit.samples],
        "dropped": fit.dropped,
        "constant": fit.constant,
        "target": fit.target,
    }


def write_fit(
    directory: Path,
    name: str,
    fit: FitResult,
    extra: Optional[Dict[str, object]] = None,
    csv: bool = True,
) -> List[Path]:
    """``<name>.json`` with the fit and ``<name>.csv`` with the (r, value) samples as plot data."""
    directory = Path(directory)
    payload: Dict[str, object] = {"kind": name}
    payload.update(fit_payload(fit))
    if extra:
        payload.update(extra)
    written = [write_json(directory / f"{name}.json", payload)]
    if csv:
        frame = pd.DataFrame(fit.samples, columns=["r", "value"])
        written.append(write_csv(directory / f"{name}.csv", frame))
    return written


REFERENCE_COLUMNS = ["p", "theta", "p_prime", "lambda", "Lambda", "alpha_sharp", "alpha_star", "critical_growth"]


def reference_frame(rows: Iterable[ReferenceExponents]) -> pd.DataFrame:
    records = [
        {
            "p": row.p,
            "theta": row.theta,
            "p_prime": row.p_prime,
            "lambda": row.lambda_min,
            "Lambda": row.lambda_max,
            "alpha_sharp": row.alpha_sharp,
            "alpha_star": row.alpha_star,
            "critical_growth": row.critical_growth,
        }
        for row in rows
    ]
    return pd.DataFrame(records, columns=REFERENCE_COLUMNS)


def write_dead_core(path: Path, report: PositivityReport, grid: Grid, exact_count: Optional[int] = None) -> Path:
    payload: Dict[str, object] = {
        "kind": "dead_core",
        "classification": report.classification,
        "tol": report.tol,
        "min_interior": report.min_interior,
        "sup_abs": report.sup_abs,
        "dead_core_count": report.dead_core_count,
        "exact_ball_count": exact_count,
        "relative_error": (
            None if not exact_count else abs(report.dead_core_count - exact_count) / float(exact_count)
        ),
        "free_boundary_cells": [list(cell) for cell in report.free_boundary_cells],
        "h": grid.spacing,
    }
    return write_json(path, payload)


def verdict_payload(verdict: ProfileVerdict) -> Dict[str, object]:
    payload = asdict(verdict)
    payload["discrepancies"] = [asdict(d) for d in verdict.discrepancies]
    return payload


def write_verdicts(directory: Path, verdicts: Sequence[ProfileVerdict]) -> List[Path]:
    """Aggregate ``verify_profiles.json`` and the residual table ``residuals.csv``."""
    directory = Path(directory)
    summary = {
        "kind": "verify_profiles",
        "profiles": [verdict_payload(v) for v in verdicts],
        "passed": sum(1 for v in verdicts if v.verdict == "PASS"),
        "discrepancies": sum(1 for v in verdicts if v.verdict != "PASS"),
    }
    rows = [
        {"profile": v.profile, "h": h, "sup_residual": res}
        for v in verdicts
        for h, res in zip(v.spacings, v.sup_residuals)
    ]
    frame = pd.DataFrame(rows, columns=["profile", "h", "sup_residual"])
    return [write_json(directory / "verify_profiles.json", summary), write_csv(directory / "residuals.csv", frame)]
