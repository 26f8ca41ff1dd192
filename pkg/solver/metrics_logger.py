"""Tensorboard integration for solver residual histories.

View with: tensorboard --logdir=logs/<command>
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Any, Dict, Optional

try:
    from torch.utils.tensorboard import SummaryWriter
    TENSORBOARD_AVAILABLE = True
except ImportError:
    SummaryWriter = None
    TENSORBOARD_AVAILABLE = False

logger = logging.getLogger(__name__)


class TensorboardLogger:
    """Logs solver sweeps to Tensorboard; a no-op when disabled or unavailable."""

    def __init__(self, log_dir: Path, enabled: bool = True, comment: str = ""):
        """Initialize Tensorboard logger.

        Args:
            log_dir: Directory for tensorboard logs
            enabled: Whether logging is enabled
            comment: Optional comment to append to log directory name
        """
        self.enabled = enabled and TENSORBOARD_AVAILABLE
        self.writer: Optional[Any] = None
        self.scalars_written = 0

        if enabled and not TENSORBOARD_AVAILABLE:
            logger.warning("tensorboard not available, residual history logging disabled")
        if self.enabled:
            log_dir = Path(log_dir)
            log_dir.mkdir(parents=True, exist_ok=True)
            self.writer = SummaryWriter(log_dir=str(log_dir), comment=comment)
            logger.info("tensorboard logging enabled: %s", log_dir)

    def log_sweep(self, iteration: int, residual: float, dt_min: float, **extra_metrics) -> None:
        """Log residual norm and smallest time step of one sampled sweep.

        Args:
            iteration: Sweep index
            residual: Sup-norm of the residual after the sweep
            dt_min: Smallest nodewise pseudo-time step
            **extra_metrics: Additional numeric metrics
        """
        if not self.enabled or not self.writer:
            return
        self.writer.add_scalar("Solver/Residual", residual, iteration)
        self.writer.add_scalar("Solver/DtMin", dt_min, iteration)
        self.scalars_written += 2
        for key, value in extra_metrics.items():
            if isinstance(value, (int, float)):
                self.writer.add_scalar(f"Solver/{key}", value, iteration)
                self.scalars_written += 1

    def log_text(self, tag: str, text: str, step: int = 0) -> None:
        if not self.enabled or not self.writer:
            return
        self.writer.add_text(tag, text, step)

    def close(self) -> None:
        if self.enabled and self.writer:
            self.writer.flush()
            self.writer.close()
            logger.info("tensorboard logger closed")

    def get_stats(self) -> Dict[str, Any]:
        return {
            "enabled": self.enabled,
            "tensorboard_available": TENSORBOARD_AVAILABLE,
            "scalars_written": self.scalars_written,
        }
