# ABOUTME: Renormalized interface curve built from a tangent angle, its frame,
# ABOUTME: and the geometric diagnostics (length, curvature, chord-arc infimum, jump)

import math
from dataclasses import dataclass

import numpy as np

from spectral_core import (
    ComplexField,
    Grid,
    SpectralField,
    antiderivative,
    derivative,
    mean,
)


H_MIN = 1e-3  # smallest admissible mean(cos theta)
CHORD_ARC_ROW_BLOCK = 512  # rows per block in the pairwise chord-arc search
PERIODIC_IMAGES = (-1, 0, 1)


class DomainBoundaryError(Exception):
    """A state left the region where the curve reconstruction is meaningful"""


class NotGraphlike(DomainBoundaryError):
    """mean(cos theta) fell to h_min or below, length per period diverges"""

    def __init__(self, mean_cos: float, h_min: float = H_MIN):
        super().__init__(f'mean(cos theta) = {mean_cos:.3e} <= h_min = {h_min:.1e}')
        self.mean_cos = mean_cos
        self.h_min = h_min


class SelfIntersecting(DomainBoundaryError):
    """Two distinct curve nodes coincide (modulo the period)"""

    def __init__(self, distance: float = 0.0, message: str | None = None):
        super().__init__(message or f'curve nodes {distance:.3e} apart modulo the period')
        self.distance = distance


class TooCloseToCurve(DomainBoundaryError):
    """Off-curve evaluation point lies on or next to the interface"""


@dataclass(frozen=True, eq=False)
class CurveGeometry:
    """Samples of the renormalized curve and its frame

    z_samples holds Z(alpha_j); the curve continues as Z(alpha + 2*pi) = Z(alpha) + M.
    """

    grid: Grid
    z_samples: ComplexField
    dz_samples: ComplexField
    tangent: ComplexField
    normal: ComplexField
    sigma: float
    length: float
    period: float
    mean_cos: float
    mean_sin: float

    def speed(self) -> np.ndarray:
        """|dZ/dalpha| at the nodes"""
        return np.abs(self.dz_samples.values)


def renormalize_curve(theta: SpectralField, period: float, h_min: float = H_MIN) -> CurveGeometry:
    """Build the period-M curve from theta, enforcing closure by construction"""
    mean_cos = mean(theta.with_values(np.cos(theta.values)))
    mean_sin = mean(theta.with_values(np.sin(theta.values)))
    if mean_cos <= h_min:
        raise NotGraphlike(mean_cos, h_min)

    grid = theta.grid
    sigma = period / (2 * math.pi * mean_cos)
    unit = np.exp(1j * theta.values)

    # int_0^alpha e^{i theta} = periodic + (mean_cos + i mean_sin) alpha; the
    # i mean_sin alpha drift cancels against the renormalization term
    periodic, _ = antiderivative(unit, grid)
    z = sigma * periodic + (period / (2 * math.pi)) * grid.nodes
    dz = sigma * (unit - 1j * mean_sin)

    tangent = dz / np.abs(dz)
    return CurveGeometry(
        grid=grid,
        z_samples=ComplexField(grid, z),
        dz_samples=ComplexField(grid, dz),
        tangent=ComplexField(grid, tangent),
        normal=ComplexField(grid, 1j * tangent),
        sigma=sigma,
        length=period / mean_cos,
        period=period,
        mean_cos=mean_cos,
        mean_sin=mean_sin,
    )


def curvature(theta: SpectralField, geometry: CurveGeometry) -> SpectralField:
    return derivative(theta).scaled(1.0 / geometry.sigma)


def chord_arc_infimum(geometry: CurveGeometry) -> float:
    """min over node pairs of |Z(a') - Z(a)| / |a' - a|, diagonal limit included"""
    nodes = geometry.grid.nodes
    z = geometry.z_samples.values
    n = len(nodes)
    best = float(np.min(geometry.speed()))

    for start in range(0, n, CHORD_ARC_ROW_BLOCK):
        rows = slice(start, min(start + CHORD_ARC_ROW_BLOCK, n))
        for image in PERIODIC_IMAGES:
            chord = z[None, :] + image * geometry.period - z[rows, None]
            arc = nodes[None, :] + image * 2 * math.pi - nodes[rows, None]
            with np.errstate(divide='ignore', invalid='ignore'):
                ratio = np.abs(chord) / np.abs(arc)
            if image == 0:
                # a' = a is the diagonal limit, covered by speed()
                local = np.arange(rows.start, rows.stop)
                ratio[local - rows.start, local] = np.inf
            best = min(best, float(np.min(ratio)))
    return best


def velocity_jump(gamma: SpectralField, gamma_bar: float, geometry: CurveGeometry) -> SpectralField:
    """Tangential velocity jump j = 2*pi*(gamma_bar + gamma_1)/L"""
    parity = 'even' if gamma.parity == 'even' else 'none'
    return gamma.with_values(2 * math.pi * (gamma_bar + gamma.values) / geometry.length, parity)


def arclength_defect(geometry: CurveGeometry) -> float:
    return float(np.max(np.abs(geometry.speed() - geometry.sigma)))


def interface_velocities(
    theta: SpectralField, c: float, velocity: ComplexField, geometry: CurveGeometry
) -> tuple[SpectralField, SpectralField]:
    """Normal velocity U = Re(W N) and the traveling-wave tangential choice V = c cos(theta)"""
    normal_velocity = np.real(velocity.values * geometry.normal.values)
    return (
        theta.with_values(normal_velocity),
        theta.with_values(c * np.cos(theta.values)),
    )
