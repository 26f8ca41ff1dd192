from solver.metrics_logger import TENSORBOARD_AVAILABLE, TensorboardLogger


def test_disabled_logger_is_a_no_op(tmp_path):
    logger = TensorboardLogger(tmp_path / "tb", enabled=False)
    logger.log_sweep(1000, 1e-4, 2e-6)
    logger.log_text("config", "p=2")
    logger.close()
    assert logger.get_stats() == {
        "enabled": False,
        "tensorboard_available": TENSORBOARD_AVAILABLE,
        "scalars_written": 0,
    }
    assert not (tmp_path / "tb").exists()


def test_enabled_logger_counts_scalars(tmp_path):
    logger = TensorboardLogger(tmp_path / "tb", enabled=True)
    logger.log_sweep(1000, 1e-4, 2e-6, damping=0.5, label="ignored")
    logger.close()
    expected = 3 if TENSORBOARD_AVAILABLE else 0
    assert logger.get_stats()["scalars_written"] == expected
