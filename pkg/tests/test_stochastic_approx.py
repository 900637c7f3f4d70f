"""
Tests for the projected and truncated Robbins-Monro recursions and online averaging.
"""
import numpy as np
import pytest

from exceptions import InvalidArgumentError, NumericalOverflowError
from schemas import CompactBox, GainSchedule
from stochastic_approx import (
    GainScale,
    chen_compacts,
    chen_step,
    gain,
    init_state,
    limit_step,
    polyak_average,
    project,
    rm_step,
    scaled_gain,
)
from utils import substream

BOX = CompactBox.symmetric(10.0, 1)


class TestGain:

    def test_default_schedule(self):
        schedule = GainSchedule()
        assert [gain(schedule, i) for i in (1, 2, 3)] == [0.5, 1 / 3, 0.25]

    def test_power_schedule(self):
        schedule = GainSchedule(gamma0=2.0, rho=0.75, i0=3)
        assert gain(schedule, 5) == pytest.approx(2.0 / 8 ** 0.75)

    @pytest.mark.parametrize("rho", [0.4, 0.5, 1.2])
    def test_rho_outside_range_rejected(self, rho):
        with pytest.raises(ValueError):
            GainSchedule(rho=rho)


class TestGainScale:

    def test_running_mean(self):
        scale = GainScale().update(4.0).update(2.0)
        assert scale.count == 2
        assert scale.value == 3.0

    def test_empty_scale_is_zero(self):
        assert GainScale().value == 0.0

    def test_scaled_gain_divides_by_mean(self):
        assert scaled_gain(0.5, GainScale().update(4.0)) == 0.125

    def test_zero_scale_leaves_gain(self):
        assert scaled_gain(0.5, GainScale().update(0.0)) == 0.5

    def test_update_returns_new_scale(self):
        scale = GainScale()
        scale.update(1.0)
        assert scale.count == 0


class TestLimitStep:

    def test_short_step_unchanged(self):
        np.testing.assert_array_equal(limit_step(np.array([0.3, -0.4]), 1.0), [0.3, -0.4])

    def test_long_step_shrinks_along_direction(self):
        np.testing.assert_allclose(limit_step(np.array([3.0, -4.0]), 1.0), [0.6, -0.8])

    def test_no_limit(self):
        np.testing.assert_array_equal(limit_step(np.array([30.0]), None), [30.0])


class TestProject:

    def test_clamp_above(self):
        np.testing.assert_array_equal(project(BOX, [12.5]), [10.0])

    def test_inside_unchanged(self):
        np.testing.assert_array_equal(project(BOX, [-3.25]), [-3.25])

    def test_idempotent(self):
        box = CompactBox(lo=[-1.0, -2.0], hi=[3.0, 0.5])
        once = project(box, [5.0, -7.0])
        np.testing.assert_array_equal(project(box, once), once)
        np.testing.assert_array_equal(once, [3.0, -2.0])

    def test_box_needs_zero_inside(self):
        with pytest.raises(ValueError):
            CompactBox(lo=[0.0], hi=[1.0])

    def test_non_expansive(self):
        box = CompactBox(lo=[-1.0, -2.0], hi=[3.0, 0.5])
        points = substream(41, 0).uniform(-6.0, 6.0, size=(2000, 2, 2))
        for a, b in points:
            moved = np.linalg.norm(project(box, a) - project(box, b))
            assert moved <= np.linalg.norm(a - b) + 1e-12


class TestRmStep:

    def test_zero_gradient(self):
        state = rm_step(init_state([1.5]), [0.0], 0.5, BOX)
        np.testing.assert_array_equal(state.theta, [1.5])
        assert state.iter == 1

    def test_hand_step(self):
        state = rm_step(init_state([0.0]), [1.0], 0.5, BOX)
        np.testing.assert_array_equal(state.theta, [-0.5])

    def test_interior_step(self):
        state = rm_step(init_state([-9.9]), [-1.0], 0.5, BOX)
        assert state.theta[0] == pytest.approx(-9.4)

    def test_projected_step(self):
        state = rm_step(init_state([9.0]), [-10.0], 1.0, BOX)
        np.testing.assert_array_equal(state.theta, [10.0])

    def test_confinement(self):
        stream = substream(31, 0)
        state = init_state([0.0])
        for i in range(1, 500):
            state = rm_step(state, stream.standard_normal(1) * 100, 1.0 / i, BOX)
            assert BOX.contains(state.theta)

    def test_non_positive_gain_rejected(self):
        with pytest.raises(InvalidArgumentError):
            rm_step(init_state([0.0]), [1.0], 0.0, BOX)

    def test_non_finite_gradient_rejected(self):
        with pytest.raises(NumericalOverflowError):
            rm_step(init_state([0.0]), [np.inf], 0.5, BOX)

    def test_step_limit(self):
        state = rm_step(init_state([0.0]), [10.0], 1.0, BOX, max_step=0.5)
        np.testing.assert_array_equal(state.theta, [-0.5])

    def test_non_positive_step_limit_rejected(self):
        with pytest.raises(InvalidArgumentError):
            rm_step(init_state([0.0]), [1.0], 0.5, BOX, max_step=0.0)

    def test_converges_to_root_of_mean_field(self):
        """H = theta - 2 + noise has its root at 2."""
        stream = substream(37, 0)
        state = init_state([0.0])
        for i in range(1, 5001):
            noise = stream.standard_normal()
            state = rm_step(state, state.theta - 2.0 + noise, gain(GainSchedule(), i), BOX)
        assert polyak_average(state)[0] == pytest.approx(2.0, abs=0.1)


class TestChenStep:

    def test_candidate_inside_is_accepted(self):
        compacts = chen_compacts(1.0, 1)
        state = chen_step(init_state([0.0]), [-0.5], 1.0, compacts, [0.0])
        np.testing.assert_array_equal(state.theta, [0.5])
        assert state.trunc_index == 0

    def test_candidate_outside_restarts(self):
        compacts = chen_compacts(1.0, 1)
        state = chen_step(init_state([0.25]), [-2.0], 1.0, compacts, [0.25])
        np.testing.assert_array_equal(state.theta, [0.25])
        assert state.trunc_index == 1
        assert compacts(state.trunc_index).hi == [2.0]

    def test_literal_keeps_index(self):
        compacts = chen_compacts(1.0, 1)
        state = chen_step(init_state([0.0]), [-2.0], 1.0, compacts, [0.0], literal=True)
        assert state.trunc_index == 0

    def test_zero_gradient(self):
        state = chen_step(init_state([0.5]), [0.0], 0.3, chen_compacts(1.0, 1), [0.5])
        np.testing.assert_array_equal(state.theta, [0.5])

    def test_step_limit_keeps_candidate_inside(self):
        compacts = chen_compacts(1.0, 1)
        state = chen_step(init_state([0.0]), [-40.0], 1.0, compacts, [0.0], max_step=0.75)
        np.testing.assert_array_equal(state.theta, [0.75])
        assert state.trunc_index == 0

    def test_compacts_expand(self):
        compacts = chen_compacts(0.5, 2)
        assert compacts(0).hi == [0.5, 0.5]
        assert compacts(3).lo == [-4.0, -4.0]


class TestPolyakAverage:

    def test_initial_average(self):
        np.testing.assert_array_equal(polyak_average(init_state([0.7])), [0.7])

    def test_arithmetic_mean(self):
        state = init_state([0.0])
        state = rm_step(state, [-1.0], 1.0, BOX)
        state = rm_step(state, [-1.0], 1.0, BOX)
        np.testing.assert_array_equal(state.theta, [2.0])
        np.testing.assert_array_equal(polyak_average(state), [1.0])

    def test_constant_iterates(self):
        state = init_state([0.3])
        for _ in range(50):
            state = rm_step(state, [0.0], 0.5, BOX)
            np.testing.assert_array_equal(polyak_average(state), [0.3])


# =============================================================================
# Normalized gain on a heavy-tailed integrand
# =============================================================================

class TestNormalizedRecursion:
    """
    Z^2 = exp(beta W) with W ~ N(0, 1) and T = 1 gives
    v(theta) = exp((beta - theta)^2 / 2 + theta^2 / 2), minimized at beta / 2.
    """

    BETA = 1.6

    def run(self, iters, seed):
        stream = substream(seed, 0)
        schedule = GainSchedule()
        state = init_state([0.0])
        scale = GainScale()
        for i in range(1, iters + 1):
            w = stream.standard_normal()
            squared = np.exp(self.BETA * w)
            theta = state.theta[0]
            grad = (theta - w) * squared * np.exp(-theta * w + 0.5 * theta * theta)
            scale = scale.update(squared)
            state = rm_step(state, [grad], scaled_gain(gain(schedule, i), scale), BOX, max_step=1.0)
        return state

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_average_reaches_minimizer(self, seed):
        state = self.run(20_000, seed)
        assert polyak_average(state)[0] == pytest.approx(self.BETA / 2, abs=0.1)

    def test_iterates_stay_moderate(self):
        state = self.run(2000, 5)
        assert abs(state.theta[0]) < 3.0
