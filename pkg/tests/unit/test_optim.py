"""Unit tests for AdamW, the cosine schedule and gradient clipping."""

import math

import numpy as np
import pytest

from swformer.config.yaml_config import OptimConfig, Schedule
from swformer.errors import DimensionError, TrainingAborted, UsageError
from swformer.train.optim import AdamW, OptimState, adamw_step, clip_grad_norm, cosine_lr
from swformer.tensor.module import Parameter


def reference_adam_on_square(theta: float, lr: float, steps: int, b1=0.9, b2=0.999, eps=1e-8) -> float:
    """Scalar Adam on f(theta) = theta^2 in plain floats."""
    m = v = 0.0
    for t in range(1, steps + 1):
        g = 2.0 * theta
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        theta -= lr * m_hat / (math.sqrt(v_hat) + eps)
    return theta


class TestAdamW:
    """Test the update rule."""

    def test_first_step_moves_by_lr(self, float64):
        """Test the bias-corrected first step is -lr * sign(g)."""
        theta = Parameter([0.0, 0.0])
        theta.grad = np.array([1.0, -3.0])
        state = OptimState()
        adamw_step({"theta": theta}, state, lr=1e-3)
        np.testing.assert_allclose(theta.data, [-1e-3, 1e-3], rtol=1e-6)
        assert state.t == 1

    def test_zero_gradient_keeps_value(self, float64):
        """Test a zero gradient without decay leaves the parameter where it is."""
        theta = Parameter([0.7])
        theta.grad = np.zeros(1)
        adamw_step({"theta": theta}, OptimState(), lr=1e-2)
        np.testing.assert_array_equal(theta.data, [0.7])

    def test_matches_scalar_oracle(self, float64):
        """Test ten steps on theta^2 against a hand-written scalar loop."""
        theta = Parameter([1.5])
        state = OptimState()
        for _ in range(10):
            theta.grad = 2.0 * theta.data
            adamw_step({"theta": theta}, state, lr=0.05)
        assert theta.data[0] == pytest.approx(reference_adam_on_square(1.5, 0.05, 10), abs=1e-10)

    def test_decoupled_weight_decay(self, float64):
        """Test decay shrinks the parameter independently of the moments."""
        theta = Parameter([2.0])
        theta.grad = np.zeros(1)
        adamw_step({"theta": theta}, OptimState(weight_decay=0.1), lr=0.01)
        assert theta.data[0] == pytest.approx(2.0 - 0.01 * 0.1 * 2.0)

    def test_non_finite_gradient_aborts_untouched(self, float64):
        """Test NaN names the parameter and nothing is written."""
        good, bad = Parameter([1.0]), Parameter([2.0])
        good.grad, bad.grad = np.array([0.5]), np.array([np.nan])
        state = OptimState()
        with pytest.raises(TrainingAborted, match="stage1.weight") as info:
            adamw_step({"head.bias": good, "stage1.weight": bad}, state, lr=0.1)
        assert info.value.parameter == "stage1.weight"
        assert info.value.exit_code == 4
        assert state.t == 0 and not state.m
        np.testing.assert_array_equal(good.data, [1.0])

    def test_parameters_without_gradient_skipped(self, float64):
        """Test a parameter with no gradient keeps its value and gets no moments."""
        used, unused = Parameter([1.0]), Parameter([1.0])
        used.grad = np.array([1.0])
        state = OptimState()
        adamw_step({"used": used, "unused": unused}, state, lr=0.1)
        assert "unused" not in state.m
        np.testing.assert_array_equal(unused.data, [1.0])

    def test_gradient_shape_checked(self):
        """Test a mismatched gradient is a dimension error."""
        theta = Parameter([1.0, 2.0])
        with pytest.raises(DimensionError):
            adamw_step({"theta": theta}, OptimState(), lr=0.1, grads={"theta": np.zeros(3)})

    def test_optimizer_wrapper(self, float64):
        """Test the wrapper takes hyperparameters from config and clears gradients."""
        theta = Parameter([1.0])
        optimizer = AdamW({"theta": theta}, OptimConfig(weight_decay=0.5))
        assert optimizer.state.hyperparameters()["weight_decay"] == 0.5
        theta.grad = np.array([1.0])
        optimizer.step(1e-3)
        optimizer.zero_grad()
        assert theta.grad is None
        assert optimizer.state.t == 1


class TestCosineSchedule:
    """Test cosine annealing."""

    @pytest.fixture
    def schedule(self):
        return Schedule(lr_init=1e-3, lr_min=1e-6, total_steps=1000)

    def test_endpoints(self, schedule):
        """Test lr_init at 0 and lr_min at T and beyond."""
        assert cosine_lr(0, schedule) == pytest.approx(1e-3)
        assert cosine_lr(1000, schedule) == pytest.approx(1e-6)
        assert cosine_lr(5000, schedule) == pytest.approx(1e-6)

    def test_midpoint(self, schedule):
        """Test the halfway value is the mean of the endpoints."""
        assert cosine_lr(500, schedule) == pytest.approx(5.005e-4)

    def test_monotone(self, schedule):
        """Test the rate never increases."""
        rates = [cosine_lr(t, schedule) for t in range(1001)]
        assert all(a >= b for a, b in zip(rates, rates[1:]))

    def test_zero_length(self):
        """Test T = 0 keeps the initial rate."""
        assert cosine_lr(3, Schedule(total_steps=0)) == pytest.approx(1e-3)

    def test_unresolved_length(self):
        """Test an unset T is a usage error."""
        with pytest.raises(UsageError, match="total_steps"):
            cosine_lr(0, Schedule())

    def test_negative_step(self, schedule):
        """Test negative steps are refused."""
        with pytest.raises(UsageError):
            cosine_lr(-1, schedule)


class TestClipping:
    """Test global-norm gradient clipping."""

    def test_clips_to_max_norm(self, float64):
        """Test a norm-5 gradient is scaled to norm 1."""
        a, b = Parameter([0.0]), Parameter([0.0])
        a.grad, b.grad = np.array([3.0]), np.array([4.0])
        assert clip_grad_norm({"a": a, "b": b}, 1.0) == pytest.approx(5.0)
        assert math.hypot(a.grad[0], b.grad[0]) == pytest.approx(1.0, rel=1e-5)

    def test_small_norm_untouched(self, float64):
        """Test gradients already inside the ball are unchanged."""
        a = Parameter([0.0])
        a.grad = np.array([0.5])
        clip_grad_norm({"a": a}, 1.0)
        np.testing.assert_array_equal(a.grad, [0.5])
