import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from lattice.grid import build_grid  # noqa: E402


@pytest.fixture
def unit_grid():
    """h = 1/16 lattice over the unit disc."""
    return build_grid(2, 1.0 / 16.0, (0.0, 0.0), 1.0)


@pytest.fixture
def coarse_grid():
    return build_grid(2, 0.125, (0.0, 0.0), 1.0)
