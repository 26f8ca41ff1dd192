from __future__ import annotations

import calendar
import json
import time
from pathlib import Path
from typing import Dict, Optional

from core.models import RunSummary, SolveReport

TIMESTAMP_FORMAT = "%Y-%m-%dT%H:%M:%SZ"


class RunLogger:
    """Per-command run directories: metadata, sampled iterations and a summary.

    Layout: ``<base_log_dir>/<command>/run_0001/`` plus ``run_counter.json``
    and an ``index.json`` of finished runs sorted by final residual.
    """

    def __init__(self, base_log_dir: Path, command: str) -> None:
        self.base_log_dir = Path(base_log_dir)
        self.command = command
        self.command_dir = self.base_log_dir / command
        self.command_dir.mkdir(parents=True, exist_ok=True)
        self.counter_path = self.command_dir / "run_counter.json"
        self.index_path = self.command_dir / "index.json"

    def start_run(self, config_path: Optional[Path] = None, threads: int = 1, extra: Optional[Dict[str, object]] = None) -> int:
        run_id = self._next_run_id()
        run_dir = self._run_dir(run_id)
        run_dir.mkdir(parents=True, exist_ok=True)
        metadata = {
            "run_id": run_id,
            "command": self.command,
            "config": str(config_path) if config_path is not None else None,
            "threads": threads,
            "started_at": self._timestamp(),
        }
        if extra:
            metadata.update(extra)
        (run_dir / "metadata.json").write_text(json.dumps(metadata, indent=2))
        (run_dir / "iterations.jsonl").write_text("")
        return run_id

    def log_sweep(self, run_id: int, iteration: int, residual: float, dt_min: float) -> None:
        self._append_jsonl(run_id, {"iteration": iteration, "residual": residual, "dt_min": dt_min})

    def log_report(self, run_id: int, label: str, report: SolveReport) -> None:
        """Record a finished solve, including the wall time kept out of output artifacts."""
        self._append_jsonl(
            run_id,
            {
                "solve": label,
                "iterations": report.iterations,
                "final_residual": report.final_residual,
                "converged": report.converged,
                "wall_seconds": report.wall_seconds,
            },
        )

    def finish_run(self, run_id: int, outcome: Optional[Dict[str, object]] = None) -> RunSummary:
        run_dir = self._run_dir(run_id)
        summary = RunSummary(
            run_id=run_id,
            command=self.command,
            started_at=str(self._read_metadata(run_id).get("started_at", "")),
            finished_at=self._timestamp(),
            total_time_seconds=self._elapsed_seconds(run_id),
            outcome=dict(outcome or {}),
        )
        (run_dir / "summary.json").write_text(json.dumps(self._summary_to_dict(summary), indent=2))
        self._update_index(summary)
        return summary

    def run_dir(self, run_id: int) -> Path:
        return self._run_dir(run_id)

    def _summary_to_dict(self, summary: RunSummary) -> Dict[str, object]:
        return {
            "run_id": summary.run_id,
            "command": summary.command,
            "started_at": summary.started_at,
            "finished_at": summary.finished_at,
            "total_time_seconds": summary.total_time_seconds,
            "outcome": summary.outcome,
        }

    def _update_index(self, summary: RunSummary) -> None:
        if self.index_path.exists():
            entries = json.loads(self.index_path.read_text())
        else:
            entries = []
        entries.append(self._summary_to_dict(summary))

        def residual_key(entry: Dict[str, object]) -> float:
            value = entry.get("outcome", {}).get("final_residual")
            return float(value) if isinstance(value, (int, float)) else float("inf")

        entries.sort(key=lambda entry: (residual_key(entry), entry.get("run_id", 0)))
        self.index_path.write_text(json.dumps(entries, indent=2))

    def _read_metadata(self, run_id: int) -> Dict[str, object]:
        metadata_path = self._run_dir(run_id) / "metadata.json"
        if not metadata_path.exists():
            return {}
        return json.loads(metadata_path.read_text())

    def _elapsed_seconds(self, run_id: int) -> float:
        started_at = self._read_metadata(run_id).get("started_at")
        if not started_at:
            return 0.0
        started = calendar.timegm(time.strptime(str(started_at), TIMESTAMP_FORMAT))
        return max(0.0, time.time() - started)

    def _append_jsonl(self, run_id: int, payload: Dict[str, object]) -> None:
        path = self._run_dir(run_id) / "iterations.jsonl"
        with path.open("a", encoding="utf-8") as handle:
            handle.write(json.dumps(payload) + "\n")

    def _next_run_id(self) -> int:
        if self.counter_path.exists():
            payload = json.loads(self.counter_path.read_text())
            run_id = int(payload.get("next_id", 1))
        else:
            run_id = 1
        self.counter_path.write_text(json.dumps({"next_id": run_id + 1}, indent=2))
        return run_id

    def _run_dir(self, run_id: int) -> Path:
        return self.command_dir / f"run_{run_id:04d}"

    def _timestamp(self) -> str:
        return time.strftime(TIMESTAMP_FORMAT, time.gmtime())
