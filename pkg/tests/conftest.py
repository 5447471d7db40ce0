from __future__ import annotations

import numpy as np
import pytest

from pmelimit.geometry import Grid, VectorFieldSpec


def centers(grid: Grid) -> np.ndarray:
    return grid.cell_centers()[..., 0]


def bump(grid: Grid, amp: float = 1.0, c: float = 0.5, w: float = 0.15) -> np.ndarray:
    x = grid.cell_centers()
    r2 = np.sum((x - c) ** 2, axis=-1)
    return amp * np.exp(-r2 / w**2)


def l1(grid: Grid, a) -> float:
    return grid.volume * float(np.sum(np.abs(a)))


@pytest.fixture
def grid64() -> Grid:
    return Grid.uniform(64)


@pytest.fixture
def expanding(grid64) -> VectorFieldSpec:
    return VectorFieldSpec.from_callable(grid64, lambda X: X - 0.5)


@pytest.fixture
def compressing(grid64) -> VectorFieldSpec:
    return VectorFieldSpec.from_callable(grid64, lambda X: -X)
