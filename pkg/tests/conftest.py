import math
import os
import sys

import numpy as np
import pytest


# Add the project root to the path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from linear_bifurcation import BifurcationPoint, bifurcation_point
from spectral_core import Grid, SpectralField, from_cosine, from_sine
from wave_system import PhysicalParameters, WaveState


@pytest.fixture  # type: ignore[misc]
def grid() -> Grid:
    """Default 64-point collocation grid"""
    return Grid(64)


@pytest.fixture  # type: ignore[misc]
def fine_grid() -> Grid:
    """128-point grid for accuracy-sensitive checks"""
    return Grid(128)


@pytest.fixture  # type: ignore[misc]
def rng() -> np.random.Generator:
    """Seeded random generator so randomized checks are reproducible"""
    return np.random.default_rng(20240611)


@pytest.fixture  # type: ignore[misc]
def capillary_params() -> PhysicalParameters:
    """Equal densities, no gravity, no mean vorticity: c_+(k) = sqrt(k/2)"""
    return PhysicalParameters(tau=1.0, period=2 * math.pi, g=0.0, atwood=0.0, gamma_bar=0.0)


@pytest.fixture  # type: ignore[misc]
def mixed_params() -> PhysicalParameters:
    """Gravity, density contrast and mean vorticity all switched on"""
    return PhysicalParameters(tau=1.0, period=2 * math.pi, g=1.0, atwood=0.5, gamma_bar=0.3)


@pytest.fixture  # type: ignore[misc]
def flat_theta(grid: Grid) -> SpectralField:
    """Tangent angle of the flat interface"""
    return SpectralField(grid, np.zeros(grid.n_points), 'odd')


@pytest.fixture  # type: ignore[misc]
def small_state(grid: Grid) -> WaveState:
    """Smooth symmetric state a little away from the flat interface"""
    theta_modes = np.zeros(grid.n_modes)
    gamma_modes = np.zeros(grid.n_modes)
    theta_modes[:3] = [0.05, -0.02, 0.01]
    gamma_modes[:3] = [0.03, 0.015, -0.005]
    return WaveState(from_sine(grid, theta_modes), from_cosine(grid, gamma_modes), 1.0)


@pytest.fixture  # type: ignore[misc]
def k2_point(grid: Grid, capillary_params: PhysicalParameters) -> BifurcationPoint:
    """Bifurcation point c_+(2) = 1 of the pure capillary problem"""
    return bifurcation_point(2, '+', capillary_params, grid)
