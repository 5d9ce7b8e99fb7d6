# ABOUTME: Periodic Fourier collocation grid and the multiplier operators
# ABOUTME: (derivative, Hilbert, inverse second derivative, means, parity) shared by the solver

import math
from collections.abc import Callable
from dataclasses import dataclass
from typing import Literal

import numpy as np
from cachetools import LRUCache, cached


Parity = Literal['odd', 'even', 'none']

# Grid constraints
MIN_GRID_POINTS = 8
DEFAULT_GRID_POINTS = 64

# Tolerances
MEAN_TOLERANCE = 1e-10  # relative to max(1, sup|f|)
PARITY_TOLERANCE = 1e-10  # relative L2 norm of the discarded coefficients
SPECTRAL_FLOOR_LEVEL = 1e-13  # Krasny filter level relative to max coefficient

_FLIPPED_PARITY: dict[str, Parity] = {'odd': 'even', 'even': 'odd', 'none': 'none'}


class GridError(ValueError):
    """Raised when a collocation grid size is not admissible"""


class NonZeroMean(ValueError):
    """Raised when a mean-zero operator receives a field with nonzero mean"""

    def __init__(self, mean_value: float):
        super().__init__(f'field mean {mean_value:.3e} is not zero')
        self.mean_value = mean_value


@dataclass(frozen=True)
class Grid:
    """Uniform grid alpha_j = 2*pi*j/n on [0, 2*pi)"""

    n_points: int = DEFAULT_GRID_POINTS

    def __post_init__(self) -> None:
        if self.n_points < MIN_GRID_POINTS or self.n_points % 2:
            raise GridError(
                f'n_points must be even and >= {MIN_GRID_POINTS}, got {self.n_points}'
            )

    @property
    def nodes(self) -> np.ndarray:
        return _nodes(self.n_points)

    @property
    def spacing(self) -> float:
        return 2 * math.pi / self.n_points

    @property
    def n_modes(self) -> int:
        """Number of symmetric unknowns per field (k = 1 .. n/2 - 1)"""
        return self.n_points // 2 - 1


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Real 2*pi-periodic scalar stored as collocation values"""

    grid: Grid
    values: np.ndarray
    parity: Parity = 'none'

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n_points,):
            raise GridError(
                f'expected {self.grid.n_points} values, got shape {values.shape}'
            )
        object.__setattr__(self, 'values', values)

    def coefficients(self) -> np.ndarray:
        """rfft coefficients normalized so that index 0 is the mean"""
        return np.fft.rfft(self.values) / self.grid.n_points

    def with_values(self, values: np.ndarray, parity: Parity = 'none') -> 'SpectralField':
        return SpectralField(self.grid, values, parity)

    def scaled(self, factor: float) -> 'SpectralField':
        return SpectralField(self.grid, factor * self.values, self.parity)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))


@dataclass(frozen=True, eq=False)
class ComplexField:
    """Complex scalar per node (curve samples, velocities)"""

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, 'values', np.asarray(self.values, dtype=complex))


@cached(LRUCache(maxsize=32))
def _nodes(n_points: int) -> np.ndarray:
    nodes = 2 * math.pi * np.arange(n_points) / n_points
    nodes.flags.writeable = False
    return nodes


@cached(LRUCache(maxsize=32))
def wavenumbers(n_points: int) -> np.ndarray:
    """Non-negative wavenumbers 0 .. n/2 matching the rfft layout"""
    k = np.arange(n_points // 2 + 1, dtype=float)
    k.flags.writeable = False
    return k


@cached(LRUCache(maxsize=32))
def full_wavenumbers(n_points: int) -> np.ndarray:
    """Signed wavenumbers matching the complex fft layout"""
    k = np.fft.fftfreq(n_points, d=1.0 / n_points)
    k.flags.writeable = False
    return k


def from_coefficients(grid: Grid, coefficients: np.ndarray, parity: Parity) -> SpectralField:
    """Inverse of SpectralField.coefficients"""
    values = np.fft.irfft(coefficients * grid.n_points, n=grid.n_points)
    return SpectralField(grid, values, parity)


def _nyquist_free(coefficients: np.ndarray) -> np.ndarray:
    coefficients[-1] = 0.0
    return coefficients


def derivative(f: SpectralField) -> SpectralField:
    k = wavenumbers(f.grid.n_points)
    coefficients = _nyquist_free(1j * k * f.coefficients())
    return from_coefficients(f.grid, coefficients, _FLIPPED_PARITY[f.parity])


def hilbert(f: SpectralField) -> SpectralField:
    """Periodic Hilbert transform, multiplier -i sgn(k)"""
    coefficients = -1j * f.coefficients()
    coefficients[0] = 0.0
    return from_coefficients(
        f.grid, _nyquist_free(coefficients), _FLIPPED_PARITY[f.parity]
    )


def mean(f: SpectralField) -> float:
    return float(f.coefficients()[0].real)


def _mean_tolerance(f: SpectralField) -> float:
    return MEAN_TOLERANCE * max(1.0, f.sup_norm())


def inverse_second_derivative(
    f: SpectralField, tolerance: float | None = None
) -> SpectralField:
    """Periodic solution u of u'' = f with zero mean, multiplier -1/k^2"""
    f_mean = mean(f)
    limit = _mean_tolerance(f) if tolerance is None else tolerance
    if abs(f_mean) > limit:
        raise NonZeroMean(f_mean)

    k = wavenumbers(f.grid.n_points)
    multiplier = np.zeros_like(k)
    multiplier[1:] = -1.0 / k[1:] ** 2
    return from_coefficients(f.grid, multiplier * f.coefficients(), f.parity)


def project_mean_zero(f: SpectralField) -> SpectralField:
    return f.with_values(f.values - mean(f), f.parity)


def project_parity(f: SpectralField, parity: Literal['odd', 'even']) -> SpectralField:
    """Keep only the sine (odd) or cosine (even) part of f"""
    coefficients = f.coefficients()
    if parity == 'odd':
        kept = 1j * coefficients.imag
        kept[0] = 0.0
        kept[-1] = 0.0
    else:
        kept = coefficients.real.astype(complex)
    return from_coefficients(f.grid, kept, parity)


def parity_defect(f: SpectralField, parity: Literal['odd', 'even']) -> float:
    """Relative L2 size of the part of f that project_parity discards"""
    total = np.linalg.norm(f.values)
    if total == 0.0:
        return 0.0
    discarded = f.values - project_parity(f, parity).values
    return float(np.linalg.norm(discarded) / total)


def has_parity(f: SpectralField, parity: Literal['odd', 'even']) -> bool:
    return parity_defect(f, parity) < PARITY_TOLERANCE


def antiderivative(values: np.ndarray, grid: Grid) -> tuple[np.ndarray, complex]:
    """Split int_0^alpha f into (periodic part vanishing at 0, mean)

    int_0^alpha f = periodic(alpha) + mean * alpha, exact for band-limited f.
    Works for real and complex samples.
    """
    n = grid.n_points
    coefficients = np.fft.fft(np.asarray(values, dtype=complex)) / n
    f_mean = complex(coefficients[0])
    k = full_wavenumbers(n)

    integrated = np.zeros_like(coefficients)
    active = k != 0
    active[n // 2] = False
    integrated[active] = coefficients[active] / (1j * k[active])
    periodic = np.fft.ifft(integrated * n)
    return periodic - periodic[0], f_mean


def sobolev_norm(f: SpectralField, order: int = 1) -> float:
    """Discrete H^s norm ((1/2pi) int sum_{j<=s} |d^j f|^2)^(1/2)"""
    coefficients = f.coefficients()
    k = wavenumbers(f.grid.n_points)
    weight = sum(k ** (2 * j) for j in range(order + 1))
    multiplicity = np.full_like(k, 2.0)
    multiplicity[0] = 1.0
    multiplicity[-1] = 1.0
    return float(np.sqrt(np.sum(multiplicity * weight * np.abs(coefficients) ** 2)))


def spectral_floor(f: SpectralField, level: float = SPECTRAL_FLOOR_LEVEL) -> SpectralField:
    """Krasny filter: zero coefficients below level * max|coefficient|"""
    coefficients = f.coefficients()
    magnitude = np.abs(coefficients)
    peak = magnitude.max()
    if peak == 0.0:
        return f
    coefficients[magnitude < level * peak] = 0.0
    return from_coefficients(f.grid, coefficients, f.parity)


def h1_weights(grid: Grid) -> np.ndarray:
    """Weights (1 + k^2)/2 making sum w_k a_k^2 the squared H^1 norm"""
    k = np.arange(1, grid.n_modes + 1, dtype=float)
    return (1.0 + k**2) / 2.0


def sine_coefficients(f: SpectralField) -> np.ndarray:
    """a_k with f = sum a_k sin(k alpha), k = 1 .. n/2 - 1"""
    return -2.0 * f.coefficients()[1 : f.grid.n_modes + 1].imag


def cosine_coefficients(f: SpectralField) -> np.ndarray:
    """b_k with f = mean + sum b_k cos(k alpha), k = 1 .. n/2 - 1"""
    return 2.0 * f.coefficients()[1 : f.grid.n_modes + 1].real


def from_sine(grid: Grid, amplitudes: np.ndarray) -> SpectralField:
    coefficients = np.zeros(grid.n_points // 2 + 1, dtype=complex)
    coefficients[1 : grid.n_modes + 1] = -0.5j * np.asarray(amplitudes, dtype=float)
    return from_coefficients(grid, coefficients, 'odd')


def from_cosine(grid: Grid, amplitudes: np.ndarray) -> SpectralField:
    coefficients = np.zeros(grid.n_points // 2 + 1, dtype=complex)
    coefficients[1 : grid.n_modes + 1] = 0.5 * np.asarray(amplitudes, dtype=float)
    return from_coefficients(grid, coefficients, 'even')


def resample(f: SpectralField, grid: Grid) -> SpectralField:
    """Spectral interpolation of f onto another grid (zero-padding or truncation)"""
    source = f.coefficients()
    target = np.zeros(grid.n_points // 2 + 1, dtype=complex)
    shared = min(len(source), len(target)) - 1
    target[:shared] = source[:shared]
    return from_coefficients(grid, target, f.parity)


def field_from_function(
    grid: Grid, function: Callable[[np.ndarray], np.ndarray], parity: Parity = 'none'
) -> SpectralField:
    """Sample a callable of alpha on the grid"""
    return SpectralField(grid, np.asarray(function(grid.nodes), dtype=float), parity)
