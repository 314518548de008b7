"""Shared fixtures for the DigiWFS Unwrap test suite."""

import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "src"))

from backend.optics.grid import ApertureSpec, PhaseGrid, centered_coordinates  # noqa: E402
from backend.simulation.screens import ScreenSpec, kolmogorov_screen  # noqa: E402


def tilt_grid(n: int, cycles_x: float, cycles_y: float = 0.0, mask=None) -> PhaseGrid:
    """Plane phase with the given number of 2*pi cycles across the grid."""
    x, y = centered_coordinates(n)
    values = 2.0 * np.pi * (cycles_x * x + cycles_y * y) / n
    return PhaseGrid(values, mask)


def aligned_error(rec: np.ndarray, truth: np.ndarray, mask: np.ndarray) -> float:
    a = rec[mask] - rec[mask].mean()
    b = truth[mask] - truth[mask].mean()
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


@pytest.fixture
def disc_mask():
    return ApertureSpec("disc", 32).mask(64)


@pytest.fixture
def full_mask():
    return np.ones((64, 64), dtype=bool)


@pytest.fixture
def screen():
    mask = ApertureSpec("disc", 64).mask(128)
    return kolmogorov_screen(ScreenSpec(n=128, r0_px=8.0, seed=3), mask)
