# ABOUTME: Newton corrector and pseudo-arclength tracing of traveling-wave branches from
# ABOUTME: bifurcation points, with per-step diagnostics and outcome classification

import logging
import math
import warnings
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field, fields

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve

from curve_geometry import (
    DomainBoundaryError,
    NotGraphlike,
    SelfIntersecting,
    arclength_defect,
    chord_arc_infimum,
    curvature,
    renormalize_curve,
    velocity_jump,
)
from linear_bifurcation import BifurcationPoint
from spectral_core import (
    Grid,
    cosine_coefficients,
    h1_weights,
    parity_defect,
    resample,
    sine_coefficients,
    sobolev_norm,
)
from wave_system import (
    DEFAULT_OPTIONS,
    PhysicalParameters,
    SolverOptions,
    WaveState,
    flat_state,
    kinematic_residual,
    mean_sin_theta,
    residual,
)


logger = logging.getLogger(__name__)

# Newton defaults
TOL_RESIDUAL = 1e-11
MAX_ITERATIONS = 50
FD_STEP = 1e-7  # relative to max(1, |x_j|)
MAX_HALVINGS = 8
SINGULAR_PIVOT_RATIO = 1e-14

# Solution-level checks on accepted records
MEAN_SIN_TOLERANCE = 1e-8
KINEMATIC_TOLERANCE = 1e-8
PARITY_DEFECT_TOLERANCE = 1e-10
ARCLENGTH_TOLERANCE = 1e-8

TRIVIAL_AMPLITUDE = 10 * np.finfo(float).eps
SPEED_ZERO_TOLERANCE = 1e-6
EXTRAPOLATION_RECORDS = 5

FAILURE_REASONS = (
    'max_iterations',
    'domain_exit',
    'singular_jacobian',
    'step_rejected',
    'identity_violation',
)


class NewtonFailure(Exception):
    """Corrector did not converge or its step was refused; reason is one of FAILURE_REASONS"""

    def __init__(
        self,
        reason: str,
        message: str,
        boundary_event: DomainBoundaryError | None = None,
        residual_norm: float = math.inf,
    ):
        super().__init__(f'{reason}: {message}')
        self.reason = reason
        self.boundary_event = boundary_event
        self.residual_norm = residual_norm


@dataclass(frozen=True)
class NewtonSettings:
    tol_residual: float = TOL_RESIDUAL
    max_iters: int = MAX_ITERATIONS
    fd_step: float = FD_STEP
    linesearch: bool = True
    max_halvings: int = MAX_HALVINGS

    def __post_init__(self) -> None:
        if not self.tol_residual > 0:
            raise ValueError('tol_residual must be positive')
        if self.max_iters < 1:
            raise ValueError('max_iters must be at least 1')
        if not self.fd_step > 0:
            raise ValueError('fd_step must be positive')


@dataclass(frozen=True)
class TraceControls:
    max_steps: int = 50
    ds_initial: float = 1e-3
    ds_min: float = 1e-5
    ds_max: float = 1e-1
    growth: float = 1.3
    successes_before_growth: int = 3
    snapshot_every: int = 10

    def __post_init__(self) -> None:
        if not 0 < self.ds_min <= self.ds_initial <= self.ds_max:
            raise ValueError('need 0 < ds_min <= ds_initial <= ds_max')
        if self.max_steps < 1 or self.growth < 1:
            raise ValueError('max_steps must be >= 1 and growth >= 1')


@dataclass(frozen=True)
class OutcomeThresholds:
    """Absolute cutoffs for the branch outcomes; use for_parameters to scale by the period"""

    length_max: float
    curvature_max: float
    jump_max: float = 1e3
    chord_arc_fraction: float = 1e-3  # of sigma
    amplitude_min: float = 1e-6
    speed_tolerance: float = 1e-3
    merge_distance: float = 1e-4
    speed_max: float = 1e3
    speed_blowup_terminal: bool = True

    @classmethod
    def for_parameters(
        cls,
        params: PhysicalParameters,
        length_factor: float = 50.0,
        curvature_factor: float = 1e3,
        **overrides: float,
    ) -> 'OutcomeThresholds':
        terminal = params.atwood == 0 and params.gamma_bar == 0
        return cls(
            length_max=length_factor * params.period,
            curvature_max=curvature_factor / params.period,
            speed_blowup_terminal=terminal,
            **overrides,
        )


@dataclass(frozen=True)
class OutcomeFlags:
    length_blowup: bool = False  # a
    curvature_blowup: bool = False  # b
    jump_blowup: bool = False  # c
    self_intersection: bool = False  # d
    loop_or_branch_merge: bool = False  # e
    speed_blowup: bool = False  # f

    @property
    def none_triggered(self) -> bool:
        return not any(getattr(self, f.name) for f in fields(self))

    def letters(self) -> list[str]:
        pairs = zip('abcdef', fields(self), strict=True)
        return [letter for letter, f in pairs if getattr(self, f.name)]

    def union(self, other: 'OutcomeFlags') -> 'OutcomeFlags':
        return OutcomeFlags(
            *(getattr(self, f.name) or getattr(other, f.name) for f in fields(self))
        )


@dataclass(frozen=True, eq=False)
class ArclengthConstraint:
    """Row <x - anchor, tangent>_W = ds of the pseudo-arclength system"""

    anchor: np.ndarray
    tangent: np.ndarray
    ds: float
    weights: np.ndarray

    def value(self, x: np.ndarray) -> float:
        return float(np.sum(self.weights * (x - self.anchor) * self.tangent) - self.ds)


@dataclass(frozen=True, eq=False)
class NewtonResult:
    state: WaveState
    residual_norm: float
    iterations: int


@dataclass(frozen=True, eq=False)
class BranchRecord:
    state: WaveState
    residual_norm: float
    amplitude: float
    length: float
    max_curvature: float
    jump_h1: float
    chord_arc: float
    mean_sin_theta: float
    step_index: int
    arclength_param: float
    kinematic_residual: float = 0.0
    parity_defect: float = 0.0
    arclength_defect: float = 0.0

    @property
    def c(self) -> float:
        return self.state.c

    def identity_failures(self) -> list[str]:
        """Names of the solution-level identities this record violates"""
        checks = {
            'mean_sin_theta': self.mean_sin_theta < MEAN_SIN_TOLERANCE,
            'kinematic_residual': self.kinematic_residual < KINEMATIC_TOLERANCE,
            'parity_defect': self.parity_defect < PARITY_DEFECT_TOLERANCE,
            'arclength_defect': self.arclength_defect < ARCLENGTH_TOLERANCE,
        }
        return [name for name, ok in checks.items() if not ok]


@dataclass
class BranchResult:
    point: BifurcationPoint
    records: list[BranchRecord] = field(default_factory=list)
    flags: OutcomeFlags = field(default_factory=OutcomeFlags)
    failure: str | None = None
    boundary_event: str | None = None
    other_speeds: tuple[float, ...] = ()


def continuation_weights(grid: Grid) -> np.ndarray:
    """H^1 x H^1 x R metric on the reduced unknowns"""
    w = h1_weights(grid)
    return np.concatenate([w, w, [1.0]])


def weighted_norm(vector: np.ndarray, weights: np.ndarray) -> float:
    return float(np.sqrt(np.sum(weights * vector**2)))


def _residual_vector(
    x: np.ndarray,
    grid: Grid,
    params: PhysicalParameters,
    constraint: ArclengthConstraint | None,
    options: SolverOptions,
) -> np.ndarray:
    result = residual(WaveState.from_vector(grid, x), params, options)
    root = np.sqrt(h1_weights(grid))
    parts = [root * sine_coefficients(result.r_theta), root * cosine_coefficients(result.r_gamma)]
    if constraint is not None:
        parts.append(np.array([constraint.value(x)]))
    return np.concatenate(parts)


def _jacobian(
    x: np.ndarray,
    f0: np.ndarray,
    active: np.ndarray,
    evaluate: Callable[[np.ndarray], np.ndarray],
    fd_step: float,
) -> np.ndarray:
    jacobian = np.empty((len(f0), len(active)))
    for column, index in enumerate(active):
        h = fd_step * max(1.0, abs(x[index]))
        shifted = x.copy()
        shifted[index] += h
        try:
            jacobian[:, column] = (evaluate(shifted) - f0) / h
        except DomainBoundaryError:
            shifted[index] = x[index] - h
            jacobian[:, column] = (f0 - evaluate(shifted)) / h
    return jacobian


def _factor(jacobian: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    with warnings.catch_warnings():
        warnings.simplefilter('ignore', LinAlgWarning)
        lu, pivots = lu_factor(jacobian)
    pivot_sizes = np.abs(np.diag(lu))
    tiny = pivot_sizes.min() <= SINGULAR_PIVOT_RATIO * pivot_sizes.max()
    if not np.all(np.isfinite(lu)) or tiny:
        raise NewtonFailure('singular_jacobian', f'smallest pivot {pivot_sizes.min():.3e}')
    return lu, pivots


def newton_solve(
    initial: WaveState,
    params: PhysicalParameters,
    settings: NewtonSettings | None = None,
    constraint: ArclengthConstraint | None = None,
    options: SolverOptions = DEFAULT_OPTIONS,
) -> NewtonResult:
    """Solve residual = 0 at fixed c, or with c free under an arclength constraint"""
    settings = settings or NewtonSettings()
    grid = initial.grid
    m = grid.n_modes
    x = initial.to_vector()
    active = np.arange(2 * m + 1) if constraint is not None else np.arange(2 * m)

    def evaluate(vector: np.ndarray) -> np.ndarray:
        return _residual_vector(vector, grid, params, constraint, options)

    def converged(values: np.ndarray) -> bool:
        return bool(np.max(np.abs(values[2 * m :]), initial=0.0) <= settings.tol_residual) and bool(
            np.linalg.norm(values[: 2 * m]) <= settings.tol_residual
        )

    try:
        f = evaluate(x)
    except DomainBoundaryError as e:
        raise NewtonFailure('domain_exit', f'initial state outside the domain ({e})', e) from e

    for iteration in range(settings.max_iters + 1):
        if converged(f):
            state = WaveState.from_vector(grid, x)
            logger.debug(f'newton converged in {iteration} iterations, c={state.c:.12g}')
            return NewtonResult(state, float(np.linalg.norm(f[: 2 * m])), iteration)
        if iteration == settings.max_iters:
            break

        lu, pivots = _factor(_jacobian(x, f, active, evaluate, settings.fd_step))
        step = -lu_solve((lu, pivots), f)

        merit = np.linalg.norm(f)
        boundary_event: DomainBoundaryError | None = None
        accepted: tuple[np.ndarray, np.ndarray] | None = None
        scale = 1.0
        for _ in range(settings.max_halvings + 1):
            trial = x.copy()
            trial[active] += scale * step
            try:
                f_trial = evaluate(trial)
            except DomainBoundaryError as e:
                boundary_event = e
                scale /= 2
                continue
            accepted = (trial, f_trial)
            if not settings.linesearch or np.linalg.norm(f_trial) < merit:
                break
            scale /= 2
        if accepted is None:
            raise NewtonFailure('domain_exit', str(boundary_event), boundary_event, float(merit))
        x, f = accepted

    raise NewtonFailure(
        'max_iterations',
        f'no convergence after {settings.max_iters} iterations',
        residual_norm=float(np.linalg.norm(f[: 2 * m])),
    )


def make_record(
    state: WaveState,
    params: PhysicalParameters,
    residual_norm: float,
    step_index: int,
    arclength_param: float,
    options: SolverOptions = DEFAULT_OPTIONS,
) -> BranchRecord:
    geometry = renormalize_curve(state.theta, params.period, options.h_min)
    return BranchRecord(
        state=state,
        residual_norm=residual_norm,
        amplitude=sobolev_norm(state.theta, 1),
        length=geometry.length,
        max_curvature=curvature(state.theta, geometry).sup_norm(),
        jump_h1=sobolev_norm(velocity_jump(state.gamma1, params.gamma_bar, geometry), 1),
        chord_arc=chord_arc_infimum(geometry),
        mean_sin_theta=abs(mean_sin_theta(state)),
        step_index=step_index,
        arclength_param=arclength_param,
        kinematic_residual=kinematic_residual(state, params, options).sup_norm(),
        parity_defect=max(parity_defect(state.theta, 'odd'), parity_defect(state.gamma1, 'even')),
        arclength_defect=arclength_defect(geometry),
    )


def boundary_event_flags(error: BaseException | None) -> OutcomeFlags:
    if isinstance(error, NotGraphlike):
        return OutcomeFlags(length_blowup=True)
    if isinstance(error, SelfIntersecting):
        return OutcomeFlags(self_intersection=True)
    return OutcomeFlags()


def _distance_to_flat(record: BranchRecord, speed: float) -> float:
    gamma_h1 = sobolev_norm(record.state.gamma1, 1)
    return math.sqrt(record.amplitude**2 + gamma_h1**2 + (record.c - speed) ** 2)


def classify_outcome(
    records: Sequence[BranchRecord],
    thresholds: OutcomeThresholds,
    *,
    c_start: float | None = None,
    other_speeds: Sequence[float] = (),
    boundary_event: BaseException | None = None,
) -> OutcomeFlags:
    """Which branch outcomes the records evidence

    other_speeds are bifurcation speeds of other (k, sign) whose flat states
    count as reconnection targets.
    """
    if not records:
        raise ValueError('classify_outcome needs at least one record')
    c_start = records[0].c if c_start is None else c_start
    last = records[-1]

    flat_again = last.amplitude < thresholds.amplitude_min
    returned = flat_again and abs(last.c - c_start) > thresholds.speed_tolerance
    merged = any(
        _distance_to_flat(record, speed) < thresholds.merge_distance
        for record in records
        for speed in other_speeds
    )

    fast = any(abs(r.c) > thresholds.speed_max for r in records)
    if fast and not thresholds.speed_blowup_terminal:
        logger.warning(
            f'|c| exceeded {thresholds.speed_max:g}; unbounded speed is excluded '
            'for these parameters, not reporting it as an outcome'
        )

    flags = OutcomeFlags(
        length_blowup=any(r.length > thresholds.length_max for r in records),
        curvature_blowup=any(r.max_curvature > thresholds.curvature_max for r in records),
        jump_blowup=any(r.jump_h1 > thresholds.jump_max for r in records),
        self_intersection=any(
            r.chord_arc < thresholds.chord_arc_fraction * r.length / (2 * math.pi) for r in records
        ),
        loop_or_branch_merge=returned or merged,
        speed_blowup=fast and thresholds.speed_blowup_terminal,
    )
    return flags.union(boundary_event_flags(boundary_event))


def _unit(vector: np.ndarray, weights: np.ndarray) -> np.ndarray:
    return vector / weighted_norm(vector, weights)


def trace_branch(
    point: BifurcationPoint,
    params: PhysicalParameters,
    controls: TraceControls | None = None,
    settings: NewtonSettings | None = None,
    thresholds: OutcomeThresholds | None = None,
    options: SolverOptions = DEFAULT_OPTIONS,
    other_speeds: Sequence[float] = (),
) -> BranchResult:
    """Pseudo-arclength continuation from a bifurcation point until an outcome or max_steps"""
    controls = controls or TraceControls()
    settings = settings or NewtonSettings()
    thresholds = thresholds or OutcomeThresholds.for_parameters(params)

    grid = point.eigen_theta.grid
    weights = continuation_weights(grid)
    x_prev = flat_state(grid, point.speed).to_vector()
    kernel = np.concatenate(
        [sine_coefficients(point.eigen_theta), cosine_coefficients(point.eigen_gamma), [0.0]]
    )
    tangent = _unit(point.orientation * kernel, weights)

    result = BranchResult(point, other_speeds=tuple(other_speeds))
    ds = controls.ds_initial
    successes = 0
    s = 0.0
    last_failure: NewtonFailure | None = None
    logger.info(f'tracing k={point.k} sign={point.sign} from c={point.speed:.12g}')

    while len(result.records) < controls.max_steps:
        constraint = ArclengthConstraint(x_prev, tangent, ds, weights)
        predicted = WaveState.from_vector(grid, x_prev + ds * tangent)
        try:
            solved = newton_solve(predicted, params, settings, constraint, options)
        except NewtonFailure as e:
            last_failure = e
            successes = 0
            ds /= 2
            logger.info(f'step failed ({e}); ds -> {ds:.3e}')
            if ds < controls.ds_min:
                break
            continue

        x_new = solved.state.to_vector()
        jump = weighted_norm(x_new - x_prev, weights)
        amplitude = sobolev_norm(solved.state.theta, 1)
        step_index = len(result.records) + 1
        rejection: NewtonFailure | None = None
        if amplitude <= TRIVIAL_AMPLITUDE:
            rejection = NewtonFailure('step_rejected', 'corrector fell back onto the flat state')
        elif jump > 2 * ds:
            rejection = NewtonFailure('step_rejected', f'step of size {jump:.3e} for ds {ds:.3e}')
        else:
            record = make_record(
                solved.state, params, solved.residual_norm, step_index, s + ds, options
            )
            failures = record.identity_failures()
            if failures:
                rejection = NewtonFailure(
                    'identity_violation', f'step {step_index} violates {", ".join(failures)}'
                )

        if rejection is not None:
            last_failure = rejection
            successes = 0
            ds /= 2
            logger.warning(f'rejected step ({rejection}); ds -> {ds:.3e}')
            if ds < controls.ds_min:
                break
            continue

        last_failure = None
        s += ds
        result.records.append(record)

        tangent = _unit(x_new - x_prev, weights)
        x_prev = x_new
        successes += 1
        if successes >= controls.successes_before_growth:
            ds = min(ds * controls.growth, controls.ds_max)
            successes = 0

        result.flags = classify_outcome(
            result.records, thresholds, c_start=point.speed, other_speeds=other_speeds
        )
        if not result.flags.none_triggered:
            logger.info(f'branch k={point.k} stopped with outcome {result.flags.letters()}')
            break
        if abs(record.c) < SPEED_ZERO_TOLERANCE:
            logger.warning(f'speed {record.c:.3e} approaching zero; terminating branch k={point.k}')
            break

    if last_failure is not None:
        result.failure = str(last_failure)
        event = last_failure.boundary_event
        result.boundary_event = type(event).__name__ if event is not None else None
        result.flags = boundary_event_flags(event)
        if result.records:
            observed = classify_outcome(
                result.records, thresholds, c_start=point.speed, other_speeds=other_speeds
            )
            result.flags = result.flags.union(observed)
    return result


def refine_state(
    state: WaveState,
    params: PhysicalParameters,
    n_points: int,
    settings: NewtonSettings | None = None,
    options: SolverOptions = DEFAULT_OPTIONS,
) -> NewtonResult:
    """Interpolate onto an n_points grid and re-converge at fixed c"""
    grid = Grid(n_points)
    interpolated = WaveState(resample(state.theta, grid), resample(state.gamma1, grid), state.c)
    return newton_solve(interpolated, params, settings, options=options)


def extrapolate_bifurcation_speed(
    records: Sequence[BranchRecord], n_records: int = EXTRAPOLATION_RECORDS
) -> float:
    """Speed at zero amplitude from a quadratic fit c(amplitude) over the first records"""
    head = list(records)[:n_records]
    if len(head) < 3:
        raise ValueError('need at least 3 records to extrapolate')
    amplitudes = np.array([r.amplitude for r in head])
    speeds = np.array([r.c for r in head])
    return float(np.polyfit(amplitudes, speeds, 2)[-1])
