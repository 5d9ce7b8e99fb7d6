# ABOUTME: Command-line entry point: loads a run configuration and runs the verify,
# ABOUTME: bifurcation-points or branch-trace modes, writing CSV/YAML results

import argparse
import csv
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Any

import numpy as np
import yaml
from dotenv import load_dotenv

from birkhoff_rott import evaluate_B, evaluate_K, incompressibility_defect
from continuation import (
    BranchResult,
    NewtonSettings,
    OutcomeThresholds,
    TraceControls,
    classify_outcome,
    trace_branch,
)
from curve_geometry import renormalize_curve
from linear_bifurcation import (
    BifurcationError,
    BifurcationPoint,
    NoRealRoot,
    admissibility,
    bifurcation_point,
    c_plus_minus,
    crossing_number_is_one,
    lambda_k,
    numeric_jacobian_check,
)
from spectral_core import (
    Grid,
    GridError,
    SpectralField,
    derivative,
    from_coefficients,
    from_cosine,
    from_sine,
    hilbert,
    inverse_second_derivative,
    mean,
    parity_defect,
    project_mean_zero,
)
from wave_system import (
    BothDensitiesZero,
    ParameterError,
    PhysicalParameters,
    SolverOptions,
    WaveState,
    flat_state,
    gamma_map,
    residual,
    theta_map,
)


load_dotenv()

logger = logging.getLogger(__name__)

PACKAGE_NAME = 'vortex-sheet-waves'
DEFAULT_OUTPUT_DIR = './runs'
DEFAULT_LOG_LEVEL = 'INFO'

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG_ERROR = 2

NUMBER_FORMAT = '.17g'
CURVE_COLUMNS = ('alpha', 're_z', 'im_z', 'theta', 'gamma1')
RECORD_COLUMNS = (
    'step_index',
    'arclength_param',
    'c',
    'amplitude',
    'residual_norm',
    'length',
    'max_curvature',
    'jump_h1',
    'chord_arc',
    'mean_sin_theta',
    'kinematic_residual',
    'outcome_flags',
)
POINT_COLUMNS = ('k', 'discriminant', 'c_plus', 'c_minus', 'l_k', 'in_K', 'near_resonance', 'note')

# Verify tolerances
OPERATOR_TOLERANCE = 1e-12
FLAT_TOLERANCE = 1e-12
SPLITTING_TOLERANCE = 1e-10
INCOMPRESSIBILITY_TOLERANCE = 1e-10
JACOBIAN_TOLERANCE = 1e-5
SPECTRUM_TOLERANCE = 1e-12
PARITY_TOLERANCE = 1e-10
VERIFY_DRAWS = 20
SPECTRUM_DRAWS = 50
CROSSING_EPSILON = 1e-4
DIRECTIONAL_STEP = 1e-6


class ConfigError(ValueError):
    """Invalid run configuration; maps to exit code 2"""


@dataclass
class RunConfig:
    tau: float = 1.0
    period: float = 2 * math.pi
    g: float = 0.0
    atwood: float | None = None
    rho1: float | None = None
    rho2: float | None = None
    gamma_bar: float = 0.0
    n_points: int = 64
    mode: str = 'verify'
    k_list: list[int] = field(default_factory=lambda: [1, 2, 3, 4, 5])
    sign: str = 'both'
    epsilon_seed: float = 1e-3
    trace: dict[str, Any] = field(default_factory=dict)
    newton: dict[str, Any] = field(default_factory=dict)
    thresholds: dict[str, Any] = field(default_factory=dict)
    output_dir: str | None = None
    seed: int = 0
    workers: int = 1
    spectral_floor: bool = False

    def params(self) -> PhysicalParameters:
        if self.rho1 is not None or self.rho2 is not None:
            return PhysicalParameters.from_densities(
                self.tau, self.period, self.g, self.rho1 or 0.0, self.rho2 or 0.0, self.gamma_bar
            )
        return PhysicalParameters(self.tau, self.period, self.g, self.atwood or 0.0, self.gamma_bar)

    def grid(self) -> Grid:
        return Grid(self.n_points)

    def signs(self) -> list[str]:
        return ['+', '-'] if self.sign == 'both' else [self.sign]

    def controls(self) -> TraceControls:
        return TraceControls(**{'ds_initial': self.epsilon_seed, **self.trace})

    def newton_settings(self) -> NewtonSettings:
        return NewtonSettings(**self.newton)

    def outcome_thresholds(self) -> OutcomeThresholds:
        return OutcomeThresholds.for_parameters(self.params(), **self.thresholds)

    def solver_options(self) -> SolverOptions:
        return SolverOptions(spectral_floor=self.spectral_floor)

    def resolved_output_dir(self) -> Path:
        return Path(self.output_dir or os.getenv('VORTEX_OUTPUT_DIR', DEFAULT_OUTPUT_DIR))

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass
class CheckResult:
    name: str
    error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.error < self.tolerance)


@dataclass
class VerifyReport:
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def to_dict(self) -> dict[str, Any]:
        return {
            'passed': self.passed,
            'checks': [
                {
                    'name': c.name,
                    'error': float(c.error),
                    'tolerance': c.tolerance,
                    'passed': c.passed,
                }
                for c in self.checks
            ],
        }


@dataclass
class PointRow:
    k: int
    discriminant: float
    c_plus: float | None
    c_minus: float | None
    l_k: float
    in_K: bool  # noqa: N815
    near_resonance: bool
    note: str = ''


@dataclass
class CurveSnapshot:
    alpha: np.ndarray
    z: np.ndarray
    theta: np.ndarray
    gamma1: np.ndarray


def package_version() -> str:
    try:
        return version(PACKAGE_NAME)
    except PackageNotFoundError:
        return '0.1.0'


# Configuration


def load_config(path: Path | None = None, overrides: dict[str, Any] | None = None) -> RunConfig:
    """Read a YAML run configuration, apply overrides, validate everything"""
    raw: dict[str, Any] = {}
    if path is not None:
        try:
            with open(path) as f:
                raw = yaml.safe_load(f) or {}
        except (OSError, yaml.YAMLError) as e:
            raise ConfigError(f'cannot read config {path}: {e}') from e
        if not isinstance(raw, dict):
            raise ConfigError(f'config {path} must be a mapping')

    flat = dict(raw.pop('physics', {}) or {})
    flat.update(raw.pop('grid', {}) or {})
    flat.update(raw)
    if 'n_points' not in flat and os.getenv('VORTEX_N_POINTS'):
        flat['n_points'] = int(os.getenv('VORTEX_N_POINTS', '64'))
    flat.update({k: v for k, v in (overrides or {}).items() if v is not None})

    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(flat) - known)
    if unknown:
        raise ConfigError(f'unknown config keys: {", ".join(unknown)}')

    config = RunConfig(**flat)
    validate_config(config)
    return config


def validate_config(config: RunConfig) -> None:
    if config.atwood is not None and (config.rho1 is not None or config.rho2 is not None):
        raise ConfigError('give either atwood or rho1/rho2, not both')
    if config.mode not in ('verify', 'points', 'trace'):
        raise ConfigError(f'unknown mode {config.mode!r}')
    if config.sign not in ('+', '-', 'both'):
        raise ConfigError(f"sign must be '+', '-' or 'both', got {config.sign!r}")
    if not config.k_list or any(int(k) != k or k < 1 for k in config.k_list):
        raise ConfigError('k_list must be a non-empty list of positive integers')
    if not config.epsilon_seed > 0:
        raise ConfigError('epsilon_seed must be positive')
    if config.workers < 1:
        raise ConfigError('workers must be at least 1')

    try:
        config.grid()
        config.params()
        config.controls()
        config.newton_settings()
        config.outcome_thresholds()
    except BothDensitiesZero as e:
        raise ConfigError(f'densities: {e}') from e
    except (GridError, ParameterError, TypeError, ValueError) as e:
        raise ConfigError(str(e)) from e

    too_fine = [k for k in config.k_list if k > config.grid().n_modes]
    if too_fine:
        raise ConfigError(f'k={too_fine} not resolved with n_points={config.n_points}')


def prepare_output_dir(path: Path) -> Path:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ConfigError(f'cannot create output directory {path}: {e}') from e
    if not os.access(path, os.W_OK):
        raise ConfigError(f'output directory {path} is not writable')
    return path


def deduplicated(k_list: list[int]) -> list[int]:
    unique = list(dict.fromkeys(int(k) for k in k_list))
    if len(unique) != len(k_list):
        logger.warning(f'duplicate wavenumbers in k_list {k_list}; using {unique}')
    return unique


# Verify mode


def _random_field(grid: Grid, rng: np.random.Generator, n_modes: int = 12) -> SpectralField:
    """Band-limited random field with a nonzero mean"""
    coefficients = np.zeros(grid.n_points // 2 + 1, dtype=complex)
    modes = min(n_modes, grid.n_modes)
    coefficients[0] = rng.normal()
    coefficients[1 : modes + 1] = (rng.normal(size=modes) + 1j * rng.normal(size=modes)) / (
        1 + np.arange(1, modes + 1)
    )
    return from_coefficients(grid, coefficients, 'none')


def _random_symmetric_state(
    grid: Grid, rng: np.random.Generator, size: float, c: float
) -> WaveState:
    decay = size / (1 + np.arange(grid.n_modes)) ** 3
    return WaveState(
        from_sine(grid, decay * rng.normal(size=grid.n_modes)),
        from_cosine(grid, decay * rng.normal(size=grid.n_modes)),
        c,
    )


def _random_params(rng: np.random.Generator) -> PhysicalParameters:
    return PhysicalParameters(
        tau=rng.uniform(0.5, 2.0),
        period=rng.uniform(math.pi, 4 * math.pi),
        g=rng.uniform(0.0, 2.0),
        atwood=rng.uniform(-1.0, 1.0),
        gamma_bar=rng.uniform(-1.0, 1.0),
    )


def _series_at(f: SpectralField, alpha: np.ndarray) -> np.ndarray:
    """Evaluate the trigonometric interpolant of f at arbitrary points"""
    coefficients = f.coefficients()
    k = np.arange(len(coefficients))
    weights = np.full(len(coefficients), 2.0)
    weights[0] = 1.0
    weights[-1] = 1.0
    return np.real(np.exp(1j * np.outer(alpha, k)) @ (weights * coefficients))


def _operator_checks(grid: Grid, rng: np.random.Generator) -> list[CheckResult]:
    f = _random_field(grid, rng)
    zero_mean = project_mean_zero(f)
    u = inverse_second_derivative(zero_mean)
    probe = rng.uniform(0, 2 * math.pi, size=16)
    return [
        CheckResult(
            'hilbert_squared',
            float(np.max(np.abs(hilbert(hilbert(f)).values + f.values - mean(f)))),
            OPERATOR_TOLERANCE,
        ),
        CheckResult('hilbert_mean', abs(mean(hilbert(f))), OPERATOR_TOLERANCE),
        CheckResult(
            'second_derivative_inverse',
            float(np.max(np.abs(derivative(derivative(u)).values - zero_mean.values))),
            OPERATOR_TOLERANCE,
        ),
        CheckResult(
            'inverse_periodicity',
            float(np.max(np.abs(_series_at(u, probe + 2 * math.pi) - _series_at(u, probe)))),
            OPERATOR_TOLERANCE,
        ),
    ]


def _flat_state_checks(grid: Grid, rng: np.random.Generator) -> list[CheckResult]:
    worst_residual = 0.0
    worst_maps = 0.0
    worst_velocity = 0.0
    for _ in range(VERIFY_DRAWS):
        params = _random_params(rng)
        state = flat_state(grid, rng.uniform(-3.0, 3.0))
        worst_residual = max(worst_residual, residual(state, params).norm_h1)
        worst_maps = max(
            worst_maps, theta_map(state, params).sup_norm(), gamma_map(state, params).sup_norm()
        )
        geometry = renormalize_curve(state.theta, params.period)
        constant = SpectralField(grid, np.full(grid.n_points, params.gamma_bar), 'even')
        velocity = evaluate_B(geometry, constant).values
        worst_velocity = max(worst_velocity, float(np.max(np.abs(velocity))))
    return [
        CheckResult('flat_residual', worst_residual, FLAT_TOLERANCE),
        CheckResult('flat_theta_gamma_maps', worst_maps, FLAT_TOLERANCE),
        CheckResult('flat_velocity', worst_velocity, FLAT_TOLERANCE),
    ]


def _splitting_checks(grid: Grid) -> list[CheckResult]:
    period = 2 * math.pi
    flat = renormalize_curve(SpectralField(grid, np.zeros(grid.n_points), 'odd'), period)
    gamma = SpectralField(grid, np.cos(3 * grid.nodes), 'even')
    expected_b = (math.pi / (1j * period)) * hilbert(gamma).values

    fine = Grid(128)
    theta = SpectralField(fine, 0.3 * np.sin(fine.nodes) + 0.1 * np.sin(2 * fine.nodes), 'odd')
    strength = SpectralField(
        fine, 1.0 + 0.5 * np.cos(fine.nodes) + 0.2 * np.cos(3 * fine.nodes), 'even'
    )
    perturbed = renormalize_curve(theta, period)
    return [
        CheckResult(
            'flat_remainder',
            float(np.max(np.abs(evaluate_K(flat, gamma).values))),
            OPERATOR_TOLERANCE,
        ),
        CheckResult(
            'flat_birkhoff_rott',
            float(np.max(np.abs(evaluate_B(flat, gamma).values - expected_b))),
            SPLITTING_TOLERANCE,
        ),
        CheckResult(
            'incompressibility',
            abs(incompressibility_defect(perturbed, strength)),
            INCOMPRESSIBILITY_TOLERANCE,
        ),
    ]


def _linearization_checks(grid: Grid, rng: np.random.Generator) -> list[CheckResult]:
    params = PhysicalParameters(tau=1.0, period=2 * math.pi, g=1.0, atwood=0.5, gamma_bar=0.3)
    c = 1.0
    jacobian_error = numeric_jacobian_check(c, params, k_max=min(8, grid.n_modes), grid=grid)

    direction = _random_symmetric_state(grid, rng, 1.0, 0.0)
    step = DIRECTIONAL_STEP
    forward = WaveState(direction.theta.scaled(step), direction.gamma1.scaled(step), c)
    backward = WaveState(direction.theta.scaled(-step), direction.gamma1.scaled(-step), c)
    d_theta = (theta_map(forward, params).values - theta_map(backward, params).values) / (2 * step)
    d_gamma = (gamma_map(forward, params).values - gamma_map(backward, params).values) / (2 * step)
    predicted = (c * params.period / math.pi) * hilbert(SpectralField(grid, d_theta)).values
    scale = max(np.max(np.abs(predicted)), 1e-300)
    gamma_error = float(np.max(np.abs(d_gamma - predicted)) / scale)
    return [
        CheckResult('jacobian_vs_closed_form', jacobian_error, JACOBIAN_TOLERANCE),
        CheckResult('gamma_linearization', gamma_error, JACOBIAN_TOLERANCE),
    ]


def _spectrum_checks(rng: np.random.Generator) -> list[CheckResult]:
    worst_root = 0.0
    drawn = 0
    while drawn < SPECTRUM_DRAWS:
        params = _random_params(rng)
        k = int(rng.integers(1, 11))
        roots = c_plus_minus(k, params)
        if isinstance(roots, NoRealRoot):
            continue
        drawn += 1
        worst_root = max(worst_root, *(abs(lambda_k(k, c, params)) for c in roots))

    missed_crossings = 0
    crossings = 0
    while crossings < VERIFY_DRAWS:
        params = _random_params(rng)
        k = int(rng.integers(1, 11))
        roots = c_plus_minus(k, params)
        if isinstance(roots, NoRealRoot) or not admissibility(k, params).in_K:
            continue
        crossings += 1
        for c in roots:
            above = lambda_k(k, c + CROSSING_EPSILON, params)
            below = lambda_k(k, c - CROSSING_EPSILON, params)
            if np.sign(above) == np.sign(below):
                missed_crossings += 1

    # A g M / (pi tau) = 6 puts the zero of lambda_2 on lambda_3 as well
    resonant = PhysicalParameters(tau=1.0, period=2 * math.pi, g=3.0, atwood=1.0)
    roots = c_plus_minus(2, resonant)
    resonance_error = 1.0
    if not isinstance(roots, NoRealRoot) and not crossing_number_is_one(2, resonant):
        resonance_error = max(abs(lambda_k(k, roots[0], resonant)) for k in (2, 3))
    return [
        CheckResult('eigenvalue_at_bifurcation_speed', worst_root, SPECTRUM_TOLERANCE),
        CheckResult('crossing_sign_change', float(missed_crossings), 0.5),
        CheckResult('resonance_exclusion', resonance_error, SPECTRUM_TOLERANCE),
    ]


def _parity_checks(grid: Grid, rng: np.random.Generator) -> list[CheckResult]:
    params = PhysicalParameters(tau=1.0, period=2 * math.pi, g=1.0, atwood=0.5, gamma_bar=0.3)
    state = _random_symmetric_state(grid, rng, 0.05, 1.0)
    theta_out = theta_map(state, params)
    gamma_out = gamma_map(state, params)
    return [
        CheckResult(
            'parity_preservation',
            max(parity_defect(theta_out, 'odd'), parity_defect(gamma_out, 'even')),
            PARITY_TOLERANCE,
        )
    ]


def run_verify(config: RunConfig) -> VerifyReport:
    rng = np.random.default_rng(config.seed)
    grid = config.grid()
    report = VerifyReport()
    for name, suite in (
        ('operator identities', lambda: _operator_checks(grid, rng)),
        ('flat state', lambda: _flat_state_checks(grid, rng)),
        ('Birkhoff-Rott splitting', lambda: _splitting_checks(grid)),
        ('linearization', lambda: _linearization_checks(grid, rng)),
        ('spectrum', lambda: _spectrum_checks(rng)),
        ('parity', lambda: _parity_checks(grid, rng)),
    ):
        print(f'🔍 Checking {name}')
        for check in suite():
            report.checks.append(check)
            marker = '✅' if check.passed else '❌'
            print(
                f'  {marker} {check.name}: error {check.error:.3e} '
                f'(tolerance {check.tolerance:.0e})'
            )

    if config.output_dir is not None:
        path = prepare_output_dir(config.resolved_output_dir()) / 'verify_report.yaml'
        with open(path, 'w') as f:
            yaml.safe_dump(report.to_dict(), f, sort_keys=False)
        print(f'💾 Wrote {path}')
    return report


# Points mode


def run_points(config: RunConfig) -> list[PointRow]:
    params = config.params()
    rows = []
    for k in deduplicated(config.k_list):
        status = admissibility(k, params)
        roots = c_plus_minus(k, params)
        in_k = crossing_number_is_one(k, params)
        c_plus: float | None
        c_minus: float | None
        if isinstance(roots, NoRealRoot):
            c_plus, c_minus, note = None, None, 'NoRealRoot'
        else:
            c_plus, c_minus = roots
            note = status.failing_condition() or ''
        row = PointRow(
            k,
            status.discriminant,
            c_plus,
            c_minus,
            status.resonant_wavenumber,
            in_k,
            status.near_resonant,
            note,
        )
        if status.near_resonant:
            print(f'⚠️  k={k} is near resonance (l_k = {status.resonant_wavenumber:.9g})')
        rows.append(row)
        if row.c_plus is None:
            speeds = 'no real root'
        else:
            speeds = f'c+ = {row.c_plus:.12g}, c- = {row.c_minus:.12g}'
        print(f'🌀 k={k}: {speeds}, in_K={row.in_K}')

    path = prepare_output_dir(config.resolved_output_dir()) / 'points.csv'
    write_points_csv(path, rows)
    print(f'💾 Wrote {path}')
    return rows


def _formatted(value: Any) -> str:
    if value is None:
        return ''
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return format(value, NUMBER_FORMAT)
    return str(value)


def write_points_csv(path: Path, rows: list[PointRow]) -> None:
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(POINT_COLUMNS)
        for row in rows:
            writer.writerow([_formatted(getattr(row, column)) for column in POINT_COLUMNS])


# Trace mode


def write_curve_file(path: Path, state: WaveState, params: PhysicalParameters) -> None:
    geometry = renormalize_curve(state.theta, params.period)
    z = geometry.z_samples.values
    columns = np.column_stack(
        [state.grid.nodes, z.real, z.imag, state.theta.values, state.gamma1.values]
    )
    header = ','.join(CURVE_COLUMNS)
    np.savetxt(path, columns, delimiter=',', header=header, comments='', fmt='%.17g')


def read_curve_file(path: Path) -> CurveSnapshot:
    data = np.loadtxt(path, delimiter=',', skiprows=1, ndmin=2)
    return CurveSnapshot(
        alpha=data[:, 0], z=data[:, 1] + 1j * data[:, 2], theta=data[:, 3], gamma1=data[:, 4]
    )


def state_from_curve_file(path: Path, c: float) -> WaveState:
    snapshot = read_curve_file(path)
    grid = Grid(len(snapshot.alpha))
    return WaveState(
        SpectralField(grid, snapshot.theta, 'odd'), SpectralField(grid, snapshot.gamma1, 'even'), c
    )


def write_branch_files(
    directory: Path, result: BranchResult, config: RunConfig, thresholds: OutcomeThresholds
) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    params = config.params()
    controls = config.controls()

    with open(directory / 'records.csv', 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(RECORD_COLUMNS)
        for index, record in enumerate(result.records):
            if index == len(result.records) - 1:
                # the final row also carries any boundary event that ended the branch
                flags = result.flags
            else:
                flags = classify_outcome(
                    result.records[: index + 1],
                    thresholds,
                    c_start=result.point.speed,
                    other_speeds=result.other_speeds,
                )
            values = {column: getattr(record, column, None) for column in RECORD_COLUMNS}
            values['c'] = record.c
            values['outcome_flags'] = ''.join(flags.letters())
            writer.writerow([_formatted(values[column]) for column in RECORD_COLUMNS])

    for record in result.records:
        last = record is result.records[-1]
        if record.step_index % controls.snapshot_every == 0 or last:
            path = directory / f'curve_step_{record.step_index:04d}.csv'
            write_curve_file(path, record.state, params)

    metadata = {
        'version': package_version(),
        'config': config.to_dict(),
        'branch': {'k': result.point.k, 'sign': result.point.sign, 'speed': result.point.speed},
        'n_records': len(result.records),
        'outcome': {**asdict(result.flags), 'none_triggered': result.flags.none_triggered},
        'failure': result.failure,
        'boundary_event': result.boundary_event,
    }
    with open(directory / 'metadata.yaml', 'w') as f:
        yaml.safe_dump(metadata, f, sort_keys=False)


def _branch_directory(root: Path, point: BifurcationPoint) -> Path:
    return root / f'branch_k{point.k}_{"plus" if point.sign == "+" else "minus"}'


def _trace_one(
    point: BifurcationPoint, config: RunConfig, others: list[float], root: Path
) -> BranchResult:
    params = config.params()
    thresholds = config.outcome_thresholds()
    print(f'🌀 Tracing k={point.k} sign={point.sign} from c={point.speed:.12g}')
    try:
        result = trace_branch(
            point,
            params,
            config.controls(),
            config.newton_settings(),
            thresholds,
            config.solver_options(),
            other_speeds=others,
        )
    except Exception as e:
        print(f'❌ Branch k={point.k} sign={point.sign} failed: {e}')
        result = BranchResult(point, failure=f'{type(e).__name__}: {e}')
    else:
        letters = result.flags.letters() or ['none']
        count = len(result.records)
        print(f'✅ Branch k={point.k} sign={point.sign}: {count} records, outcome {letters}')
    write_branch_files(_branch_directory(root, point), result, config, thresholds)
    return result


def run_trace(config: RunConfig) -> list[BranchResult]:
    params = config.params()
    grid = config.grid()
    k_list = deduplicated(config.k_list)

    for k in k_list:
        status = admissibility(k, params)
        if not status.in_K:
            raise ConfigError(f'k={k} cannot be traced: {status.failing_condition()}')
    root = prepare_output_dir(config.resolved_output_dir())

    points = []
    for k in k_list:
        for sign in config.signs():
            try:
                points.append(bifurcation_point(k, sign, params, grid))  # type: ignore[arg-type]
            except BifurcationError as e:
                raise ConfigError(f'k={k} sign={sign} cannot be seeded: {e}') from e

    all_speeds = []
    for k in range(1, grid.n_modes + 1):
        roots = c_plus_minus(k, params)
        if not isinstance(roots, NoRealRoot):
            all_speeds.extend((k, speed) for speed in roots)

    def others(point: BifurcationPoint) -> list[float]:
        return [speed for k, speed in all_speeds if k != point.k]

    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        return list(pool.map(lambda p: _trace_one(p, config, others(p), root), points))


# Command line


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description='Traveling vortex-sheet waves: spectra and branches'
    )
    sub = parser.add_subparsers(dest='mode', required=True)

    for mode, help_text in (
        ('verify', 'Run the invariant and identity checks'),
        ('points', 'Tabulate bifurcation speeds per wavenumber'),
        ('trace', 'Continue branches from bifurcation points'),
    ):
        command = sub.add_parser(mode, help=help_text)
        command.add_argument(
            '--config', type=Path, required=mode == 'points', help='YAML run configuration'
        )
        command.add_argument(
            '--output-dir', help='Directory for results (default $VORTEX_OUTPUT_DIR)'
        )
        command.add_argument('--n-points', type=int, help='Grid size')
        command.add_argument('--seed', type=int, help='Random seed for randomized checks')
        if mode == 'trace':
            command.add_argument('--k', type=int, help='Trace only this wavenumber')
            command.add_argument('--sign', choices=['+', '-'], help='Trace only this sign')
            command.add_argument('--workers', type=int, help='Branches traced concurrently')
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=os.getenv('VORTEX_LOG_LEVEL', DEFAULT_LOG_LEVEL).upper(),
        format='%(asctime)s %(levelname)s %(name)s: %(message)s',
    )
    args = build_parser().parse_args(argv)
    overrides: dict[str, Any] = {
        'mode': args.mode,
        'output_dir': args.output_dir,
        'n_points': args.n_points,
        'seed': args.seed,
    }
    if args.mode == 'trace':
        overrides['k_list'] = [args.k] if args.k is not None else None
        overrides['sign'] = args.sign
        overrides['workers'] = args.workers

    try:
        config = load_config(args.config, overrides)
        if config.mode == 'verify':
            report = run_verify(config)
            if not report.passed:
                failed = [c.name for c in report.checks if not c.passed]
                print(f'❌ {len(failed)} check(s) failed: {", ".join(failed)}')
                return EXIT_CHECK_FAILED
            print(f'✅ All {len(report.checks)} checks passed')
        elif config.mode == 'points':
            run_points(config)
        else:
            results = run_trace(config)
            print(f'✅ Traced {len(results)} branch(es) into {config.resolved_output_dir()}')
    except ConfigError as e:
        print(f'❌ Configuration error: {e}')
        return EXIT_CONFIG_ERROR
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
