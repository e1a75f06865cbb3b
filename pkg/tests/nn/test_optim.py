"""Tests for SGD with momentum and the learning-rate schedule."""

import numpy as np
import pytest

from sdtd.models.exceptions import NumericalError
from sdtd.nn.optim import SgdState, sgd_momentum_update, step_learning_rate


class TestSgdMomentum:
    """Test the heavy-ball update."""

    def test_first_step(self):
        """Test v = -lr * g on the first step."""
        params = {"w": np.array([1.0])}
        state = sgd_momentum_update(params, {"w": np.array([1.0])}, SgdState(0.1, 0.9))
        assert state.velocity["w"][0] == pytest.approx(-0.1)
        assert params["w"][0] == pytest.approx(0.9)

    def test_second_step(self):
        """Test the velocity recurrence over two identical steps."""
        params = {"w": np.array([1.0])}
        state = SgdState(0.1, 0.9)
        for _ in range(2):
            sgd_momentum_update(params, {"w": np.array([1.0])}, state)
        assert state.velocity["w"][0] == pytest.approx(-0.19)
        assert params["w"][0] == pytest.approx(1.0 - 0.29)

    def test_zero_momentum_is_plain_sgd(self):
        """Test that momentum 0 takes -lr * g every step."""
        params = {"w": np.zeros(2)}
        state = SgdState(0.5, 0.0)
        for _ in range(3):
            sgd_momentum_update(params, {"w": np.array([1.0, -2.0])}, state)
        np.testing.assert_allclose(params["w"], [-1.5, 3.0])

    def test_float32_parameters_stay_float32(self):
        """Test that the update keeps the parameter dtype."""
        params = {"w": np.ones(3, dtype=np.float32)}
        sgd_momentum_update(params, {"w": np.ones(3)}, SgdState(0.1))
        assert params["w"].dtype == np.float32

    def test_nonfinite_gradient(self):
        """Test that no parameter changes when a gradient is NaN."""
        params = {"a": np.ones(1), "b": np.ones(1)}
        with pytest.raises(NumericalError, match="'b'"):
            sgd_momentum_update(params, {"a": np.ones(1), "b": np.array([np.nan])}, SgdState(0.1))
        assert params["a"][0] == 1.0

    def test_shape_mismatch(self):
        """Test gradient and parameter shapes must agree."""
        with pytest.raises(ValueError):
            sgd_momentum_update({"w": np.ones(2)}, {"w": np.ones(3)}, SgdState(0.1))

    def test_momentum_range(self):
        """Test that momentum must be below one."""
        with pytest.raises(ValueError):
            SgdState(0.1, momentum=1.0)


class TestStepLearningRate:
    """Test the step schedule."""

    def test_milestones(self):
        """Test the rate drops by gamma at each milestone."""
        rates = [step_learning_rate(0.1, it, [10, 20], 0.1) for it in (0, 9, 10, 19, 20, 50)]
        np.testing.assert_allclose(rates, [0.1, 0.1, 0.01, 0.01, 0.001, 0.001])

    def test_no_milestones(self):
        """Test a constant rate."""
        assert step_learning_rate(0.05, 1000, [], 0.1) == 0.05
