# ABOUTME: Closed-form linearization of the traveling-wave map at the flat interface:
# ABOUTME: eigenvalues, bifurcation speeds, crossing-number test and branch seeds

import logging
import math
from collections.abc import Iterable
from dataclasses import dataclass
from typing import Literal

import numpy as np

from spectral_core import (
    Grid,
    SpectralField,
    cosine_coefficients,
    from_cosine,
    from_sine,
    sine_coefficients,
    sobolev_norm,
)
from wave_system import PhysicalParameters, WaveState, flat_state, residual


logger = logging.getLogger(__name__)

Sign = Literal['+', '-']

RESONANCE_TOLERANCE = 1e-9
NEAR_RESONANCE_WINDOW = 1e-3
EIGENVALUE_ZERO_TOLERANCE = 1e-10
JACOBIAN_CHECK_STEP = 1e-6


class BifurcationError(ValueError):
    """Base class for refused bifurcation-point requests"""


class ZeroSpeed(BifurcationError):
    """The eigenfunction -(pi/(cM)) sin(k alpha) is undefined at c = 0"""


class InadmissibleWavenumber(BifurcationError):
    """k fails one of the crossing-number-one conditions"""


@dataclass(frozen=True)
class NoRealRoot:
    """lambda_k(c) has no real zero: the discriminant is not positive"""

    k: int
    discriminant: float


@dataclass(frozen=True, eq=False)
class LinearBlock:
    """Fourier-side 2x2 block of the linearization for one wavenumber"""

    k: int
    entries: np.ndarray

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.entries)


@dataclass(frozen=True)
class Admissibility:
    """Outcome of the two crossing-number-one conditions for one k"""

    k: int
    discriminant: float
    resonant_wavenumber: float
    discriminant_positive: bool
    resonant: bool
    near_resonant: bool

    @property
    def in_K(self) -> bool:  # noqa: N802
        return self.discriminant_positive and not self.resonant

    def failing_condition(self) -> str | None:
        if not self.discriminant_positive:
            return f'discriminant {self.discriminant:.6g} is not positive'
        if self.resonant:
            return f'l_k = {self.resonant_wavenumber:.6g} is a positive integer other than k'
        return None


@dataclass(frozen=True, eq=False)
class BifurcationPoint:
    k: int
    sign: Sign
    speed: float
    in_K: bool  # noqa: N815
    eigen_theta: SpectralField
    eigen_gamma: SpectralField

    @property
    def orientation(self) -> float:
        """Direction of departure along the kernel: +1 from c_+, -1 from c_-

        With this choice the c_- branch of an A = 0, gamma_bar = 0 problem is the
        c_+ branch under (c, gamma1) -> (-c, -gamma1).
        """
        return 1.0 if self.sign == '+' else -1.0


def _gravity_ratio(params: PhysicalParameters) -> float:
    """A g M / (pi tau)"""
    return params.atwood * params.g * params.period / (math.pi * params.tau)


def lambda_k(k: int, c: float, params: PhysicalParameters) -> float:
    tau, m, a, gb = params.tau, params.period, params.atwood, params.gamma_bar
    k = abs(k)
    middle = (2 * gb * c * a * m * math.pi - m**2 * c**2 - gb**2 * math.pi**2) / (m * math.pi * tau)
    return 1.0 + middle / k + _gravity_ratio(params) / k**2


def discriminant(k: int, params: PhysicalParameters) -> float:
    tau, m, a, g, gb = params.tau, params.period, params.atwood, params.g, params.gamma_bar
    pi = math.pi
    shear = pi**2 * gb**2 * k**2 * (a**2 - 1)
    return shear + pi * tau * k**3 * m + k * a * g * m**2


def c_plus_minus(k: int, params: PhysicalParameters) -> tuple[float, float] | NoRealRoot:
    d = discriminant(k, params)
    if d <= 0:
        return NoRealRoot(k, d)
    shift = math.pi * params.gamma_bar * params.atwood / params.period
    spread = math.sqrt(d) / (k * params.period)
    return shift + spread, shift - spread


def resonant_wavenumber(k: int, params: PhysicalParameters) -> float:
    """l_k = A g M / (pi tau k), the partner wavenumber sharing the zero of lambda"""
    return _gravity_ratio(params) / k


def admissibility(k: int, params: PhysicalParameters) -> Admissibility:
    d = discriminant(k, params)
    l_k = resonant_wavenumber(k, params)
    nearest = round(l_k)
    gap = abs(l_k - nearest)
    integer_partner = nearest >= 1 and nearest != k
    return Admissibility(
        k=k,
        discriminant=d,
        resonant_wavenumber=l_k,
        discriminant_positive=d > 0,
        resonant=integer_partner and gap < RESONANCE_TOLERANCE,
        near_resonant=integer_partner and RESONANCE_TOLERANCE <= gap < NEAR_RESONANCE_WINDOW,
    )


def crossing_number_is_one(k: int, params: PhysicalParameters) -> bool:
    status = admissibility(k, params)
    if status.near_resonant:
        logger.warning(f'k={k} is near resonance: l_k = {status.resonant_wavenumber:.9g}')
    if params.atwood == 0 and not status.discriminant_positive:
        logger.warning(
            f'k={k}: A = 0 but the discriminant {status.discriminant:.6g} is not positive; '
            'k is excluded even though equal densities are usually said to admit every k'
        )
    return status.in_K


def linear_block(k: int, c: float, params: PhysicalParameters) -> LinearBlock:
    """L_c(k) on the complex Fourier side, k != 0"""
    if k == 0:
        return LinearBlock(0, np.eye(2, dtype=complex))
    tau, m, a, gb = params.tau, params.period, params.atwood, params.gamma_bar
    pi = math.pi
    size = abs(k)
    sgn = math.copysign(1.0, k)
    shear = gb / tau - c * a * m / (pi * tau)

    l11 = 1 - (pi * gb / m) * shear / size + _gravity_ratio(params) / k**2
    l12 = 1j * (a * gb * pi / (tau * m) - c / tau) / k
    l21 = 1j * c * gb * shear / k - 1j * (c * m**2 * a * params.g / (pi**2 * tau)) * sgn / k**2
    l22 = 1 + c * (a * gb / tau - c * m / (pi * tau)) / size
    return LinearBlock(k, np.array([[l11, l12], [l21, l22]], dtype=complex))


def symmetric_block(k: int, c: float, params: PhysicalParameters) -> np.ndarray:
    """Real restriction of the block to (sin k alpha for theta, cos k alpha for gamma1), k >= 1"""
    tau, m, a, gb = params.tau, params.period, params.atwood, params.gamma_bar
    pi = math.pi
    shear = gb / tau - c * a * m / (pi * tau)
    transport = a * gb * pi / (tau * m) - c / tau
    coupling = c * gb * shear
    gravity = c * m**2 * a * params.g / (pi**2 * tau)

    entries = linear_block(k, c, params).entries
    return np.array(
        [
            [entries[0, 0].real, -transport / k],
            [coupling / k - gravity / k**2, entries[1, 1].real],
        ]
    )


def crossing_slope(k: int, sign: Sign, params: PhysicalParameters) -> tuple[float, float]:
    """(d lambda_k / dc, second-order coefficient) at c_+/-(k)"""
    d = discriminant(k, params)
    if d <= 0:
        raise InadmissibleWavenumber(f'no real crossing at k={k}')
    orientation = -1.0 if sign == '+' else 1.0
    slope = orientation * 2 * math.sqrt(d) / (k**2 * math.pi * params.tau)
    return slope, -params.period / (params.tau * k * math.pi)


def zero_multiplicity(
    c: float, params: PhysicalParameters, k_max: int, tolerance: float = EIGENVALUE_ZERO_TOLERANCE
) -> int:
    return sum(1 for k in range(1, k_max + 1) if abs(lambda_k(k, c, params)) < tolerance)


def eigenfunctions(
    grid: Grid, k: int, speed: float, period: float
) -> tuple[SpectralField, SpectralField]:
    if speed == 0:
        raise ZeroSpeed(f'bifurcation speed is zero at k={k}')
    theta_modes = np.zeros(grid.n_modes)
    gamma_modes = np.zeros(grid.n_modes)
    theta_modes[k - 1] = -math.pi / (speed * period)
    gamma_modes[k - 1] = 1.0
    return from_sine(grid, theta_modes), from_cosine(grid, gamma_modes)


def bifurcation_point(
    k: int, sign: Sign, params: PhysicalParameters, grid: Grid
) -> BifurcationPoint:
    if not 1 <= k <= grid.n_modes:
        raise InadmissibleWavenumber(f'k={k} is not resolved on a {grid.n_points}-point grid')
    roots = c_plus_minus(k, params)
    if isinstance(roots, NoRealRoot):
        d = roots.discriminant
        raise InadmissibleWavenumber(f'k={k}: discriminant {d:.6g} is not positive')
    speed = roots[0] if sign == '+' else roots[1]
    eigen_theta, eigen_gamma = eigenfunctions(grid, k, speed, params.period)
    return BifurcationPoint(
        k=k,
        sign=sign,
        speed=speed,
        in_K=crossing_number_is_one(k, params),
        eigen_theta=eigen_theta,
        eigen_gamma=eigen_gamma,
    )


def bifurcation_points(
    params: PhysicalParameters,
    k_list: Iterable[int],
    grid: Grid,
    signs: Iterable[Sign] = ('+', '-'),
) -> list[BifurcationPoint]:
    """Seedable points for the requested (k, sign); NoRealRoot and c = 0 cases are skipped"""
    points = []
    for k in k_list:
        for sign in signs:
            try:
                points.append(bifurcation_point(k, sign, params, grid))
            except BifurcationError as e:
                logger.info(f'skipping k={k} sign={sign}: {e}')
    return points


def first_admissible_after(
    params: PhysicalParameters, k_start: int = 1, k_max: int = 10_000
) -> int | None:
    for k in range(k_start, k_max + 1):
        if admissibility(k, params).in_K:
            return k
    return None


def branch_seed(
    point: BifurcationPoint, epsilon: float, normalization: Literal['raw', 'h1'] = 'raw'
) -> WaveState:
    """Flat state plus epsilon times the eigenfunction, in the direction of point.orientation

    normalization='h1' rescales so that the theta component has H^1 norm epsilon.
    """
    if point.speed == 0:
        raise ZeroSpeed(f'bifurcation speed is zero at k={point.k}')
    if not point.in_K:
        raise InadmissibleWavenumber(f'k={point.k} does not have crossing number one')
    scale = point.orientation * epsilon
    if normalization == 'h1':
        scale /= sobolev_norm(point.eigen_theta, 1)
    return WaveState(
        theta=point.eigen_theta.scaled(scale),
        gamma1=point.eigen_gamma.scaled(scale),
        c=point.speed,
    )


def _reduced_residual(state: WaveState, params: PhysicalParameters, k_max: int) -> np.ndarray:
    result = residual(state, params)
    return np.concatenate(
        [sine_coefficients(result.r_theta)[:k_max], cosine_coefficients(result.r_gamma)[:k_max]]
    )


def numeric_jacobian_check(
    c: float,
    params: PhysicalParameters,
    k_max: int,
    grid: Grid | None = None,
    step: float = JACOBIAN_CHECK_STEP,
) -> float:
    """Max relative deviation of the central-difference Jacobian at the flat state
    from the closed-form blocks"""
    grid = grid or Grid()
    if not 1 <= k_max <= grid.n_modes:
        raise ValueError(f'k_max must lie in 1..{grid.n_modes}, got {k_max}')

    base = flat_state(grid, c).to_vector()
    m = grid.n_modes
    columns = [*range(k_max), *range(m, m + k_max)]

    numeric = np.zeros((2 * k_max, 2 * k_max))
    for column, index in enumerate(columns):
        forward = base.copy()
        backward = base.copy()
        forward[index] += step
        backward[index] -= step
        numeric[:, column] = (
            _reduced_residual(WaveState.from_vector(grid, forward), params, k_max)
            - _reduced_residual(WaveState.from_vector(grid, backward), params, k_max)
        ) / (2 * step)

    expected = np.zeros_like(numeric)
    for k in range(1, k_max + 1):
        block = symmetric_block(k, c, params)
        rows = [k - 1, k_max + k - 1]
        expected[np.ix_(rows, rows)] = block

    return float(np.max(np.abs(numeric - expected)) / np.max(np.abs(expected)))
