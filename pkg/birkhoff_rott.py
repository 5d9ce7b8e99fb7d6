# ABOUTME: Periodic Birkhoff-Rott integral on a renormalized curve, its splitting into
# ABOUTME: Hilbert part plus smooth remainder K, and the induced velocity off the sheet

import logging
import math
from dataclasses import dataclass

import numpy as np
from cachetools import LRUCache, cached

from curve_geometry import CurveGeometry, SelfIntersecting, TooCloseToCurve
from spectral_core import ComplexField, SpectralField, hilbert


logger = logging.getLogger(__name__)

COINCIDENT_NODE_TOLERANCE = 1e-12  # relative to the period M
OFF_CURVE_DISTANCE_FLOOR = 1e-6  # relative to the period M
KERNEL_IMAG_CLAMP = 700.0  # |Im| beyond which cot(z) is replaced by -/+ i


@dataclass(frozen=True, eq=False)
class KernelEvaluation:
    """B split as hilbert_part + k_values"""

    b_values: ComplexField
    k_values: ComplexField
    hilbert_part: ComplexField


@cached(LRUCache(maxsize=16))
def _alternating_mask(n_points: int) -> np.ndarray:
    """True where j - l is odd (the nodes used by the alternating-point rule)"""
    index = np.arange(n_points)
    mask = (index[:, None] - index[None, :]) % 2 == 1
    mask.flags.writeable = False
    return mask


def _reduce_by_period(difference: np.ndarray, period: float) -> np.ndarray:
    return difference - period * np.round(difference.real / period)


def _cot(argument: np.ndarray) -> np.ndarray:
    """Complex cotangent with its +/- i asymptotes far from the real axis"""
    result = np.empty_like(argument, dtype=complex)
    upper = argument.imag > KERNEL_IMAG_CLAMP
    lower = argument.imag < -KERNEL_IMAG_CLAMP
    inner = ~(upper | lower)
    result[upper] = -1j
    result[lower] = 1j
    result[inner] = 1.0 / np.tan(argument[inner])
    return result


def _check_distinct_nodes(geometry: CurveGeometry) -> None:
    z = geometry.z_samples.values
    separation = np.abs(_reduce_by_period(z[:, None] - z[None, :], geometry.period))
    np.fill_diagonal(separation, np.inf)
    closest = float(np.min(separation))
    if closest < COINCIDENT_NODE_TOLERANCE * geometry.period:
        raise SelfIntersecting(closest)


def evaluate_B(geometry: CurveGeometry, gamma_total: SpectralField) -> ComplexField:
    """(1/2iM) PV int gamma(a') cot(pi (w(a) - w(a'))/M) da' by the alternating-point rule"""
    _check_distinct_nodes(geometry)
    grid = geometry.grid
    period = geometry.period
    mask = _alternating_mask(grid.n_points)
    z = geometry.z_samples.values

    argument = (math.pi / period) * (z[:, None] - z[None, :])
    kernel = np.zeros_like(argument, dtype=complex)
    kernel[mask] = _cot(argument[mask])

    weight = 2.0 * grid.spacing
    values = (weight / (2j * period)) * (kernel @ gamma_total.values)
    return ComplexField(grid, values)


def split_birkhoff_rott(geometry: CurveGeometry, gamma_total: SpectralField) -> KernelEvaluation:
    b_values = evaluate_B(geometry, gamma_total)
    hilbert_part = hilbert(gamma_total).values / (2j * geometry.dz_samples.values)
    return KernelEvaluation(
        b_values=b_values,
        k_values=ComplexField(geometry.grid, b_values.values - hilbert_part),
        hilbert_part=ComplexField(geometry.grid, hilbert_part),
    )


def evaluate_K(geometry: CurveGeometry, gamma_total: SpectralField) -> ComplexField:
    """Smooth remainder K = B - (1/(2i w_alpha)) H gamma"""
    return split_birkhoff_rott(geometry, gamma_total).k_values


def normal_tangential_components(
    geometry: CurveGeometry, velocity: ComplexField
) -> tuple[SpectralField, SpectralField]:
    """(Re(W N), Re(W T)) at the nodes"""
    grid = geometry.grid
    normal = np.real(velocity.values * geometry.normal.values)
    tangential = np.real(velocity.values * geometry.tangent.values)
    return SpectralField(grid, normal), SpectralField(grid, tangential)


def evaluate_velocity_offcurve(
    geometry: CurveGeometry, gamma_total: SpectralField, point: complex
) -> complex:
    """Fluid velocity u = conj((1/2iM) int gamma cot(pi (p - w)/M)) at a point off the sheet"""
    period = geometry.period
    offset = _reduce_by_period(point - geometry.z_samples.values, period)
    closest = float(np.min(np.abs(offset)))
    if closest < OFF_CURVE_DISTANCE_FLOOR * period:
        floor = OFF_CURVE_DISTANCE_FLOOR * period
        raise TooCloseToCurve(f'point {point} is {closest:.3e} from the curve, floor {floor:.3e}')

    kernel = _cot((math.pi / period) * offset)
    weight = geometry.grid.spacing / (2j * period)
    conjugate_velocity = weight * np.sum(gamma_total.values * kernel)
    return complex(np.conj(conjugate_velocity))


def incompressibility_defect(geometry: CurveGeometry, gamma_total: SpectralField) -> float:
    """Arclength mean of the normal velocity Re(B N) over one period

    Equals the plain mean when |w_alpha| is constant (arclength parameterized curves).
    """
    normal, _ = normal_tangential_components(geometry, evaluate_B(geometry, gamma_total))
    speed = geometry.speed()
    return float(np.sum(normal.values * speed) / np.sum(speed))
