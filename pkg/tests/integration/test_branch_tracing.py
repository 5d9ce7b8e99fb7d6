import math

import numpy as np
import pytest

from continuation import (
    ArclengthConstraint,
    BranchResult,
    TraceControls,
    continuation_weights,
    extrapolate_bifurcation_speed,
    newton_solve,
    refine_state,
    trace_branch,
    weighted_norm,
)
from linear_bifurcation import bifurcation_point, branch_seed
from spectral_core import Grid, cosine_coefficients, resample, sine_coefficients, sobolev_norm
from wave_system import PhysicalParameters, flat_state, residual


# Test constants for the capillary k = 2 branch
TWO_PI = 2 * math.pi
EPSILON = 1e-3
BRANCH_STEPS = 50
MIRROR_STEPS = 10
MIRROR_TOLERANCE = 1e-8

pytestmark = [pytest.mark.integration, pytest.mark.slow]


@pytest.fixture(scope='module')  # type: ignore[misc]
def capillary() -> PhysicalParameters:
    """tau = 1, M = 2 pi, equal densities, no gravity or shear"""
    return PhysicalParameters(tau=1.0, period=TWO_PI)


@pytest.fixture(scope='module')  # type: ignore[misc]
def k2_branch(capillary: PhysicalParameters) -> BranchResult:
    """Fifty pseudo-arclength steps from c_+(2) = 1"""
    point = bifurcation_point(2, '+', capillary, Grid(64))
    return trace_branch(point, capillary, TraceControls(max_steps=BRANCH_STEPS))


class TestSeedCorrection:
    """Test the Newton corrector at the bifurcation point"""

    def test_seed_converges_to_nontrivial_state(self, capillary: PhysicalParameters) -> None:
        """Test the epsilon seed corrects onto the branch with comparable amplitude"""
        grid = Grid(64)
        point = bifurcation_point(2, '+', capillary, grid)
        weights = continuation_weights(grid)
        direction = np.concatenate(
            [sine_coefficients(point.eigen_theta), cosine_coefficients(point.eigen_gamma), [0.0]]
        )
        size = weighted_norm(direction, weights)
        constraint = ArclengthConstraint(
            anchor=flat_state(grid, point.speed).to_vector(),
            tangent=direction / size,
            ds=EPSILON * size,
            weights=weights,
        )
        result = newton_solve(branch_seed(point, EPSILON), capillary, constraint=constraint)

        assert result.residual_norm < 1e-11
        amplitude = sobolev_norm(result.state.theta, 1)
        assert EPSILON / 3 < amplitude < 3 * EPSILON


class TestCapillaryBranch:
    """Test the traced k = 2 branch of pure capillary waves"""

    def test_all_steps_converge(self, k2_branch: BranchResult) -> None:
        """Test every accepted step is a converged solution satisfying the identities"""
        assert len(k2_branch.records) == BRANCH_STEPS
        for record in k2_branch.records:
            assert record.residual_norm < 1e-10
            assert record.identity_failures() == []

    def test_amplitude_grows_from_zero(self, k2_branch: BranchResult) -> None:
        """Test the amplitude leaves the trivial branch monotonically"""
        amplitudes = [record.amplitude for record in k2_branch.records]
        assert amplitudes[0] > 0
        assert all(later > earlier for earlier, later in zip(amplitudes, amplitudes[1:], strict=False))

    def test_speed_limit_at_zero_amplitude(self, k2_branch: BranchResult) -> None:
        """Test the branch emanates from c_+(2) = 1"""
        assert extrapolate_bifurcation_speed(k2_branch.records) == pytest.approx(1.0, abs=1e-3)
        assert k2_branch.records[-1].c != pytest.approx(1.0, abs=1e-9)

    def test_arclength_grows(self, k2_branch: BranchResult) -> None:
        """Test the arclength parameter increases step by step"""
        params = [record.arclength_param for record in k2_branch.records]
        assert params == sorted(params)
        assert [record.step_index for record in k2_branch.records] == list(range(1, BRANCH_STEPS + 1))

    def test_grid_refinement(self, k2_branch: BranchResult, capillary: PhysicalParameters) -> None:
        """Test a branch state re-converges on a doubled grid without moving"""
        state = k2_branch.records[-1].state
        refined = refine_state(state, capillary, 128)
        assert refined.residual_norm < 1e-11
        difference = refined.state.theta.values - resample(state.theta, Grid(128)).values
        assert np.max(np.abs(difference)) < 1e-8
        assert residual(refined.state, capillary).norm_h1 < 1e-10

    def test_mirror_branch(self, k2_branch: BranchResult, capillary: PhysicalParameters) -> None:
        """Test tracing from c_-(2) gives the c_+ branch under c -> -c, gamma1 -> -gamma1"""
        point = bifurcation_point(2, '-', capillary, Grid(64))
        mirror = trace_branch(point, capillary, TraceControls(max_steps=MIRROR_STEPS))
        assert len(mirror.records) == MIRROR_STEPS
        for plus, minus in zip(k2_branch.records, mirror.records, strict=False):
            assert minus.c == pytest.approx(-plus.c, abs=MIRROR_TOLERANCE)
            theta_gap = minus.state.theta.values - plus.state.theta.values
            gamma_gap = minus.state.gamma1.values + plus.state.gamma1.values
            assert np.max(np.abs(theta_gap)) < MIRROR_TOLERANCE
            assert np.max(np.abs(gamma_gap)) < MIRROR_TOLERANCE
