import logging
import math

import numpy as np
import pytest
from pytest_mock import MockerFixture

from continuation import (
    ArclengthConstraint,
    BranchRecord,
    NewtonFailure,
    NewtonResult,
    NewtonSettings,
    OutcomeFlags,
    OutcomeThresholds,
    TraceControls,
    _jacobian,
    boundary_event_flags,
    classify_outcome,
    continuation_weights,
    extrapolate_bifurcation_speed,
    make_record,
    newton_solve,
    refine_state,
    trace_branch,
    weighted_norm,
)
from curve_geometry import NotGraphlike, SelfIntersecting
from linear_bifurcation import BifurcationPoint
from spectral_core import Grid, from_cosine, from_sine
from wave_system import InnerCurveSelfIntersecting, PhysicalParameters, WaveState, flat_state


# Test constants for branch bookkeeping
TWO_PI = 2 * math.pi
C_START = 1.0


@pytest.fixture  # type: ignore[misc]
def thresholds(capillary_params: PhysicalParameters) -> OutcomeThresholds:
    """Default cutoffs for the equal-density, zero-shear problem"""
    return OutcomeThresholds.for_parameters(capillary_params)


def synthetic_record(grid: Grid, step_index: int = 1, c: float = C_START, **overrides: float) -> BranchRecord:
    """Record with harmless diagnostics unless overridden"""
    values: dict[str, float] = {
        'residual_norm': 1e-12,
        'amplitude': 0.1,
        'length': TWO_PI,
        'max_curvature': 1.0,
        'jump_h1': 1.0,
        'chord_arc': 0.9,
        'mean_sin_theta': 0.0,
        'arclength_param': 0.01 * step_index,
    }
    values.update(overrides)
    return BranchRecord(state=flat_state(grid, c), step_index=step_index, **values)


def perturbed_flat(grid: Grid, c: float, size: float) -> WaveState:
    theta_modes = np.zeros(grid.n_modes)
    gamma_modes = np.zeros(grid.n_modes)
    theta_modes[:2] = [size, -0.5 * size]
    gamma_modes[:2] = [0.5 * size, size]
    return WaveState(from_sine(grid, theta_modes), from_cosine(grid, gamma_modes), c)


class TestSettings:
    """Test configuration dataclasses"""

    def test_newton_settings_validation(self) -> None:
        """Test non-positive tolerances and iteration counts are refused"""
        with pytest.raises(ValueError, match='tol_residual'):
            NewtonSettings(tol_residual=0.0)
        with pytest.raises(ValueError, match='max_iters'):
            NewtonSettings(max_iters=0)

    def test_trace_controls_validation(self) -> None:
        """Test ds_min <= ds_initial <= ds_max is enforced"""
        with pytest.raises(ValueError, match='ds_min'):
            TraceControls(ds_initial=1.0, ds_max=0.1)

    def test_thresholds_scale_with_period(self, capillary_params: PhysicalParameters) -> None:
        """Test length and curvature cutoffs follow the period"""
        thresholds = OutcomeThresholds.for_parameters(capillary_params)
        assert thresholds.length_max == pytest.approx(50 * TWO_PI)
        assert thresholds.curvature_max == pytest.approx(1e3 / TWO_PI)
        assert thresholds.speed_blowup_terminal

    def test_speed_blowup_not_terminal_with_shear(self, mixed_params: PhysicalParameters) -> None:
        """Test unbounded speed is only an outcome for A = 0 and gamma_bar = 0"""
        assert not OutcomeThresholds.for_parameters(mixed_params).speed_blowup_terminal

    def test_weights_give_h1_norm(self, grid: Grid) -> None:
        """Test the weighted norm of the theta block equals the H^1 norm"""
        weights = continuation_weights(grid)
        assert weights.shape == (2 * grid.n_modes + 1,)
        assert weights[-1] == 1.0
        vector = np.zeros_like(weights)
        vector[1] = 1.0  # sin(2 alpha)
        assert weighted_norm(vector, weights) == pytest.approx(math.sqrt(2.5))

    def test_arclength_constraint(self) -> None:
        """Test the constraint row <x - anchor, t>_W - ds"""
        constraint = ArclengthConstraint(
            anchor=np.zeros(3), tangent=np.array([1.0, 0.0, 0.0]), ds=0.1, weights=np.array([2.0, 1.0, 1.0])
        )
        assert constraint.value(np.array([0.05, 7.0, 7.0])) == pytest.approx(0.0)


class TestOutcomeFlags:
    """Test the outcome flag container"""

    def test_letters_and_union(self) -> None:
        """Test letters follow a-f order and union is an elementwise or"""
        flags = OutcomeFlags(length_blowup=True).union(OutcomeFlags(speed_blowup=True))
        assert flags.letters() == ['a', 'f']
        assert not flags.none_triggered
        assert OutcomeFlags().none_triggered

    def test_boundary_event_flags(self) -> None:
        """Test domain exits map to length blowup or self-intersection"""
        assert boundary_event_flags(NotGraphlike(1e-4)).letters() == ['a']
        assert boundary_event_flags(SelfIntersecting(0.0)).letters() == ['d']
        assert boundary_event_flags(InnerCurveSelfIntersecting(0.0)).letters() == ['d']
        assert boundary_event_flags(None).none_triggered


class TestClassifyOutcome:
    """Test synthetic record sequences trigger exactly the intended outcome"""

    def test_quiet_branch(self, grid: Grid, thresholds: OutcomeThresholds) -> None:
        """Test ordinary records trigger nothing"""
        records = [synthetic_record(grid, i) for i in range(1, 4)]
        assert classify_outcome(records, thresholds).none_triggered

    @pytest.mark.parametrize(
        ('override', 'letter'),
        [
            ({'length': 1e3}, 'a'),
            ({'max_curvature': 1e3}, 'b'),
            ({'jump_h1': 2e3}, 'c'),
            ({'chord_arc': 1e-5}, 'd'),
        ],
    )
    def test_single_blowup(
        self, grid: Grid, thresholds: OutcomeThresholds, override: dict[str, float], letter: str
    ) -> None:
        """Test each geometric blowup sets its own flag only"""
        records = [synthetic_record(grid, 1), synthetic_record(grid, 2, **override)]
        assert classify_outcome(records, thresholds).letters() == [letter]

    def test_return_to_flat_at_other_speed(self, grid: Grid, thresholds: OutcomeThresholds) -> None:
        """Test a branch that comes back to the trivial branch elsewhere is a loop"""
        records = [synthetic_record(grid, 1), synthetic_record(grid, 2, c=1.5, amplitude=1e-8)]
        flags = classify_outcome(records, thresholds, c_start=C_START)
        assert flags.letters() == ['e']

    def test_small_amplitude_at_start_is_not_a_loop(
        self, grid: Grid, thresholds: OutcomeThresholds
    ) -> None:
        """Test amplitude near zero at the starting speed is not reported"""
        records = [synthetic_record(grid, 1, amplitude=1e-8)]
        assert classify_outcome(records, thresholds, c_start=C_START).none_triggered

    def test_merge_with_other_bifurcation_point(
        self, grid: Grid, thresholds: OutcomeThresholds
    ) -> None:
        """Test proximity to another wavenumber's flat state is a reconnection"""
        records = [synthetic_record(grid, 1), synthetic_record(grid, 2, c=1.2247, amplitude=0.0)]
        flags = classify_outcome(records, thresholds, c_start=C_START, other_speeds=[math.sqrt(1.5)])
        assert flags.letters() == ['e']

    def test_speed_blowup_terminal(self, grid: Grid, thresholds: OutcomeThresholds) -> None:
        """Test |c| beyond the cap is an outcome when no shear is present"""
        records = [synthetic_record(grid, 1), synthetic_record(grid, 2, c=2e3)]
        assert classify_outcome(records, thresholds, c_start=C_START).letters() == ['f']

    def test_speed_blowup_warning_with_shear(
        self, grid: Grid, mixed_params: PhysicalParameters, caplog: pytest.LogCaptureFixture
    ) -> None:
        """Test |c| growth is only logged when shear or density contrast is present"""
        thresholds = OutcomeThresholds.for_parameters(mixed_params)
        records = [synthetic_record(grid, 1), synthetic_record(grid, 2, c=2e3)]
        with caplog.at_level(logging.WARNING):
            flags = classify_outcome(records, thresholds, c_start=C_START)
        assert flags.none_triggered
        assert 'not reporting it' in caplog.text

    def test_boundary_event_added(self, grid: Grid, thresholds: OutcomeThresholds) -> None:
        """Test a boundary event adds its flag to the record-based ones"""
        records = [synthetic_record(grid, 1, jump_h1=5e3)]
        flags = classify_outcome(records, thresholds, boundary_event=NotGraphlike(0.0))
        assert flags.letters() == ['a', 'c']

    def test_needs_records(self, thresholds: OutcomeThresholds) -> None:
        """Test an empty sequence is refused"""
        with pytest.raises(ValueError, match='at least one record'):
            classify_outcome([], thresholds)


class TestRecords:
    """Test per-step diagnostics"""

    def test_make_record(self, small_state: WaveState, mixed_params: PhysicalParameters) -> None:
        """Test the record carries geometry and solution-identity diagnostics"""
        record = make_record(small_state, mixed_params, 1e-12, 3, 0.25)
        assert record.step_index == 3
        assert record.arclength_param == 0.25
        assert record.c == 1.0
        assert record.length > TWO_PI
        assert record.amplitude > 0
        assert record.mean_sin_theta < 1e-12
        assert record.parity_defect < 1e-10
        assert record.arclength_defect < 1e-12
        assert 0 < record.chord_arc <= record.length / TWO_PI + 1e-12

    def test_identity_failures(self, grid: Grid) -> None:
        """Test violated identities are named"""
        assert synthetic_record(grid).identity_failures() == []
        assert synthetic_record(grid, mean_sin_theta=1e-3).identity_failures() == ['mean_sin_theta']

    def test_extrapolate_speed(self, grid: Grid) -> None:
        """Test the quadratic fit recovers the zero-amplitude speed"""
        amplitudes = [0.01, 0.02, 0.03, 0.04, 0.05]
        records = [
            synthetic_record(grid, i, c=1.0 + 0.3 * a**2, amplitude=a)
            for i, a in enumerate(amplitudes, start=1)
        ]
        assert extrapolate_bifurcation_speed(records) == pytest.approx(1.0, abs=1e-10)

    def test_extrapolate_needs_three(self, grid: Grid) -> None:
        """Test fewer than three records are refused"""
        with pytest.raises(ValueError, match='at least 3'):
            extrapolate_bifurcation_speed([synthetic_record(grid, 1), synthetic_record(grid, 2)])


class TestNewton:
    """Test the Newton corrector"""

    def test_flat_state_converges_immediately(
        self, grid: Grid, capillary_params: PhysicalParameters
    ) -> None:
        """Test an exact solution needs no iterations"""
        result = newton_solve(flat_state(grid, 0.5), capillary_params)
        assert result.iterations == 0
        assert result.residual_norm < 1e-12

    def test_returns_to_flat_away_from_bifurcation(
        self, grid: Grid, capillary_params: PhysicalParameters
    ) -> None:
        """Test a small perturbation at a non-bifurcation speed falls back to the flat state"""
        result = newton_solve(perturbed_flat(grid, 0.5, 1e-3), capillary_params)
        assert result.iterations >= 1
        assert result.residual_norm < 1e-11
        assert result.state.theta.sup_norm() < 1e-10
        assert result.state.c == 0.5

    def test_max_iterations(self, grid: Grid, capillary_params: PhysicalParameters) -> None:
        """Test running out of iterations is reported with the last residual"""
        settings = NewtonSettings(tol_residual=1e-15, max_iters=1)
        with pytest.raises(NewtonFailure) as excinfo:
            newton_solve(perturbed_flat(grid, 0.5, 0.05), capillary_params, settings)
        assert excinfo.value.reason == 'max_iterations'
        assert math.isfinite(excinfo.value.residual_norm)

    def test_singular_jacobian(
        self, grid: Grid, capillary_params: PhysicalParameters, mocker: MockerFixture
    ) -> None:
        """Test a degenerate Jacobian is refused rather than solved"""
        size = 2 * grid.n_modes
        mocker.patch('continuation._jacobian', return_value=np.zeros((size, size)))
        with pytest.raises(NewtonFailure) as excinfo:
            newton_solve(perturbed_flat(grid, 0.5, 1e-3), capillary_params)
        assert excinfo.value.reason == 'singular_jacobian'

    def test_domain_exit(
        self, grid: Grid, capillary_params: PhysicalParameters, mocker: MockerFixture
    ) -> None:
        """Test a boundary event at the initial state is a domain exit"""
        mocker.patch('continuation.residual', side_effect=NotGraphlike(0.0))
        with pytest.raises(NewtonFailure) as excinfo:
            newton_solve(flat_state(grid, 0.5), capillary_params)
        assert excinfo.value.reason == 'domain_exit'
        assert isinstance(excinfo.value.boundary_event, NotGraphlike)

    def test_jacobian_falls_back_to_backward_difference(self) -> None:
        """Test a column whose forward step leaves the domain is differenced backward"""

        def evaluate(x: np.ndarray) -> np.ndarray:
            if x[0] > 1.0:
                raise NotGraphlike(0.0)
            return np.array([x[0] ** 2, 3.0 * x[1]])

        x = np.array([1.0, 2.0])
        jacobian = _jacobian(x, evaluate(x), np.arange(2), evaluate, 1e-7)
        assert jacobian[0, 0] == pytest.approx(2.0, rel=1e-5)
        assert jacobian[1, 1] == pytest.approx(3.0, rel=1e-6)

    def test_refine_state(self, capillary_params: PhysicalParameters) -> None:
        """Test a solution is interpolated onto a finer grid and re-converged"""
        result = refine_state(flat_state(Grid(32), 0.5), capillary_params, 64)
        assert result.state.grid.n_points == 64
        assert result.iterations == 0


class TestTraceBranch:
    """Test step-size control and termination of the tracer"""

    def test_repeated_failure_stops_with_boundary_flag(
        self, k2_point: BifurcationPoint, capillary_params: PhysicalParameters, mocker: MockerFixture
    ) -> None:
        """Test ds halves below ds_min and the boundary event becomes the outcome"""
        failure = NewtonFailure('domain_exit', 'left the domain', SelfIntersecting(0.0))
        solver = mocker.patch('continuation.newton_solve', side_effect=failure)
        controls = TraceControls(ds_initial=1e-3, ds_min=1e-4)
        result = trace_branch(k2_point, capillary_params, controls)
        assert result.records == []
        assert solver.call_count == 4
        assert result.boundary_event == 'SelfIntersecting'
        assert result.flags.letters() == ['d']
        assert result.failure is not None
        assert 'domain_exit' in result.failure

    def test_collapse_to_flat_state_reports_rejection(
        self,
        grid: Grid,
        k2_point: BifurcationPoint,
        capillary_params: PhysicalParameters,
        mocker: MockerFixture,
    ) -> None:
        """Test corrections that fall back onto the flat state stop the branch with a reason"""
        collapsed = NewtonResult(flat_state(grid, k2_point.speed), 1e-12, 1)
        solver = mocker.patch('continuation.newton_solve', return_value=collapsed)
        controls = TraceControls(ds_initial=1e-3, ds_min=1e-4)
        result = trace_branch(k2_point, capillary_params, controls)
        assert result.records == []
        assert solver.call_count == 4
        assert result.failure is not None
        assert result.failure.startswith('step_rejected')
        assert result.flags.none_triggered

    def test_identity_violation_is_never_accepted(
        self,
        grid: Grid,
        k2_point: BifurcationPoint,
        capillary_params: PhysicalParameters,
        mocker: MockerFixture,
    ) -> None:
        """Test a converged state breaking mean(sin theta) = 0 is refused and named"""
        solved = NewtonResult(perturbed_flat(grid, k2_point.speed, 1e-4), 1e-12, 1)
        mocker.patch('continuation.newton_solve', return_value=solved)
        recorder = mocker.patch(
            'continuation.make_record', return_value=synthetic_record(grid, mean_sin_theta=1e-3)
        )
        controls = TraceControls(ds_initial=1e-3, ds_min=1e-4)
        result = trace_branch(k2_point, capillary_params, controls)
        assert result.records == []
        assert recorder.call_count == 4
        assert result.failure is not None
        assert result.failure.startswith('identity_violation')
        assert 'mean_sin_theta' in result.failure
