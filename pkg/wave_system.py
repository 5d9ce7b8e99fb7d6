# ABOUTME: Traveling-wave equations for the two-fluid vortex sheet in fixed-point form:
# ABOUTME: the maps Phi, Theta, Gamma and the residual (theta - Theta, gamma1 - Gamma)

import logging
import math
from dataclasses import dataclass

import numpy as np

from birkhoff_rott import evaluate_B, evaluate_K, normal_tangential_components
from curve_geometry import (
    H_MIN,
    CurveGeometry,
    SelfIntersecting,
    chord_arc_infimum,
    interface_velocities,
    renormalize_curve,
)
from spectral_core import (
    Grid,
    SpectralField,
    cosine_coefficients,
    derivative,
    from_cosine,
    from_sine,
    hilbert,
    inverse_second_derivative,
    mean,
    project_parity,
    sine_coefficients,
    sobolev_norm,
    spectral_floor,
)


logger = logging.getLogger(__name__)

INNER_CHORD_ARC_FLOOR = 1e-10  # relative to M/(2*pi)


class ParameterError(ValueError):
    """Physical constants outside their admissible ranges"""


class BothDensitiesZero(ParameterError):
    """Atwood number requested with rho1 = rho2 = 0"""


class InnerCurveSelfIntersecting(SelfIntersecting):
    """The curve rebuilt from Theta(theta, gamma1; c) fails the chord-arc check"""


@dataclass(frozen=True)
class PhysicalParameters:
    """Constants of one problem instance: tau, period M, gravity, Atwood number, mean strength"""

    tau: float
    period: float
    g: float = 0.0
    atwood: float = 0.0
    gamma_bar: float = 0.0

    def __post_init__(self) -> None:
        if not self.tau > 0:
            raise ParameterError(f'surface tension tau must be positive, got {self.tau}')
        if not self.period > 0:
            raise ParameterError(f'period M must be positive, got {self.period}')
        if not abs(self.atwood) <= 1:
            raise ParameterError(f'Atwood number must lie in [-1, 1], got {self.atwood}')
        for name in ('g', 'gamma_bar'):
            if not math.isfinite(getattr(self, name)):
                raise ParameterError(f'{name} must be finite')

    @classmethod
    def from_densities(
        cls,
        tau: float,
        period: float,
        g: float,
        rho1: float,
        rho2: float,
        gamma_bar: float = 0.0,
    ) -> 'PhysicalParameters':
        return cls(tau, period, g, atwood_from_densities(rho1, rho2), gamma_bar)


@dataclass(frozen=True)
class SolverOptions:
    """Numerical policies of the residual evaluation"""

    h_min: float = H_MIN
    inner_chord_arc_floor: float = INNER_CHORD_ARC_FLOOR
    spectral_floor: bool = False


DEFAULT_OPTIONS = SolverOptions()


@dataclass(frozen=True, eq=False)
class WaveState:
    """Unknowns (theta odd, gamma1 even mean-zero, speed c)"""

    theta: SpectralField
    gamma1: SpectralField
    c: float

    @property
    def grid(self) -> Grid:
        return self.theta.grid

    def to_vector(self) -> np.ndarray:
        """Reduced symmetric coordinates: sine coefficients of theta, cosine of gamma1, then c"""
        return np.concatenate(
            [sine_coefficients(self.theta), cosine_coefficients(self.gamma1), [self.c]]
        )

    @classmethod
    def from_vector(cls, grid: Grid, vector: np.ndarray) -> 'WaveState':
        m = grid.n_modes
        return cls(
            theta=from_sine(grid, vector[:m]),
            gamma1=from_cosine(grid, vector[m : 2 * m]),
            c=float(vector[2 * m]),
        )


@dataclass(frozen=True, eq=False)
class Residual:
    r_theta: SpectralField
    r_gamma: SpectralField
    norm_h1: float


def atwood_from_densities(rho1: float, rho2: float) -> float:
    if rho1 < 0 or rho2 < 0:
        raise ParameterError(f'densities must be non-negative, got {rho1}, {rho2}')
    if rho1 + rho2 == 0:
        raise BothDensitiesZero('densities rho1 and rho2 cannot both be zero')
    return (rho1 - rho2) / (rho1 + rho2)


def flat_state(grid: Grid, c: float) -> WaveState:
    zeros = np.zeros(grid.n_points)
    return WaveState(
        SpectralField(grid, zeros, 'odd'), SpectralField(grid, zeros.copy(), 'even'), c
    )


def total_strength(state: WaveState, params: PhysicalParameters) -> SpectralField:
    return state.gamma1.with_values(params.gamma_bar + state.gamma1.values, state.gamma1.parity)


def _filtered(field: SpectralField, options: SolverOptions) -> SpectralField:
    return spectral_floor(field) if options.spectral_floor else field


def phi_tilde(
    state: WaveState, params: PhysicalParameters, options: SolverOptions = DEFAULT_OPTIONS
) -> SpectralField:
    theta = state.theta
    geometry = renormalize_curve(theta, params.period, options.h_min)
    gamma = total_strength(state, params)

    _, tangential = normal_tangential_components(geometry, evaluate_K(geometry, gamma))
    relative_speed = state.c * np.cos(theta.values) - tangential.values

    period = params.period
    mean_cos = geometry.mean_cos
    circulation = derivative(theta.with_values(relative_speed * gamma.values))
    strength_squared = derivative(theta.with_values(gamma.values**2))
    speed_squared = derivative(theta.with_values(relative_speed**2))
    buoyancy = np.sin(theta.values) - geometry.mean_sin

    bracket = (
        (math.pi * mean_cos / (2 * period)) * strength_squared.values
        + (params.g * period / (math.pi * mean_cos)) * buoyancy
        + (period / (2 * math.pi * mean_cos)) * speed_squared.values
    )
    values = circulation.values / params.tau - (params.atwood / params.tau) * bracket
    return _filtered(theta.with_values(values), options)


def theta_map(
    state: WaveState, params: PhysicalParameters, options: SolverOptions = DEFAULT_OPTIONS
) -> SpectralField:
    """Theta = -d^-2 Phi"""
    return inverse_second_derivative(phi_tilde(state, params, options)).scaled(-1.0)


def _inner_geometry(
    theta_out: SpectralField, params: PhysicalParameters, options: SolverOptions
) -> CurveGeometry:
    geometry = renormalize_curve(theta_out, params.period, options.h_min)
    floor = options.inner_chord_arc_floor * params.period / (2 * math.pi)
    chord_arc = chord_arc_infimum(geometry)
    if chord_arc <= floor:
        raise InnerCurveSelfIntersecting(
            chord_arc, f'inner curve chord-arc {chord_arc:.3e} below {floor:.3e}'
        )
    return geometry


def gamma_map(
    state: WaveState,
    params: PhysicalParameters,
    options: SolverOptions = DEFAULT_OPTIONS,
    theta_out: SpectralField | None = None,
) -> SpectralField:
    """Gamma = 2 H{ |dZ[Theta]| Re(K[Z[Theta]] gamma N[Theta]) + c |dZ[Theta]| sin Theta }"""
    if theta_out is None:
        theta_out = theta_map(state, params, options)
    geometry = _inner_geometry(theta_out, params, options)
    gamma = total_strength(state, params)

    normal, _ = normal_tangential_components(geometry, evaluate_K(geometry, gamma))
    speed = geometry.speed()
    source = speed * normal.values + state.c * speed * np.sin(theta_out.values)
    return _filtered(hilbert(theta_out.with_values(2.0 * source)), options)


def residual(
    state: WaveState, params: PhysicalParameters, options: SolverOptions = DEFAULT_OPTIONS
) -> Residual:
    theta_out = project_parity(theta_map(state, params, options), 'odd')
    gamma_out = project_parity(gamma_map(state, params, options, theta_out), 'even')

    r_theta = state.theta.with_values(state.theta.values - theta_out.values, 'odd')
    r_gamma = state.gamma1.with_values(state.gamma1.values - gamma_out.values, 'even')
    norm = math.hypot(sobolev_norm(r_theta, 1), sobolev_norm(r_gamma, 1))
    return Residual(r_theta, r_gamma, norm)


def kinematic_residual(
    state: WaveState, params: PhysicalParameters, options: SolverOptions = DEFAULT_OPTIONS
) -> SpectralField:
    """U + c sin(theta), U = Re(B N) the normal velocity on the curve of theta itself"""
    geometry = renormalize_curve(state.theta, params.period, options.h_min)
    velocity = evaluate_B(geometry, total_strength(state, params))
    normal_velocity, _ = interface_velocities(state.theta, state.c, velocity, geometry)
    return normal_velocity.with_values(
        normal_velocity.values + state.c * np.sin(state.theta.values)
    )


def mean_sin_theta(state: WaveState) -> float:
    return mean(state.theta.with_values(np.sin(state.theta.values)))
