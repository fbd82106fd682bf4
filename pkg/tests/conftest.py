import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # makes oracles importable

from ravflow.grid import Field, Grid2D


@pytest.fixture
def grid_2pi():
    return Grid2D(64, 64, 2 * np.pi, 2 * np.pi)


@pytest.fixture
def grid_small():
    return Grid2D(8, 8, 2 * np.pi, 2 * np.pi)


@pytest.fixture
def grid_16():
    return Grid2D(16, 16, 2 * np.pi, 2 * np.pi)


def sine_ic(grid: Grid2D, amp: float = 0.05) -> Field:
    X, Y = grid.xy
    return Field(grid, amp * np.sin(X) * np.sin(Y))
