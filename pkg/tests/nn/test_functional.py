"""Tests for activations and layer kernels."""

import math

import numpy as np
import pytest

from sdtd.models.exceptions import ShapeError
from sdtd.nn.functional import (
    conv2d_backward,
    conv2d_forward,
    fc_backward,
    fc_forward,
    maxpool2x2_backward,
    maxpool2x2_forward,
    relu_backward,
    relu_forward,
    sigmoid,
    softmax,
    softmax_cross_entropy,
    tanh_phi,
)
from sdtd.nn.gradcheck import grad_check


def naive_conv(x, w, b, pad):
    n, _, height, width = x.shape
    out_ch, _, kh, kw = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    ho, wo = height + 2 * pad - kh + 1, width + 2 * pad - kw + 1
    y = np.zeros((n, out_ch, ho, wo))
    for i in range(n):
        for o in range(out_ch):
            for r in range(ho):
                for c in range(wo):
                    y[i, o, r, c] = np.sum(xp[i, :, r : r + kh, c : c + kw] * w[o]) + b[o]
    return y


class TestActivations:
    """Test sigmoid and tanh."""

    def test_sigmoid_zero(self):
        """Test the midpoint."""
        assert sigmoid(np.array([0.0]))[0] == 0.5

    def test_sigmoid_saturates(self):
        """Test extreme inputs without overflow."""
        out = sigmoid(np.array([-710.0, 710.0]))
        assert out[0] == pytest.approx(0.0, abs=1e-300)
        assert out[1] == 1.0
        assert np.all(np.isfinite(out))

    def test_sigmoid_matches_formula(self):
        """Test against math.exp on moderate inputs."""
        xs = np.linspace(-10, 10, 41)
        expected = [1.0 / (1.0 + math.exp(-x)) for x in xs]
        np.testing.assert_allclose(sigmoid(xs), expected, rtol=1e-12)

    def test_tanh_identity(self):
        """Test tanh(x) == 2 sigmoid(2x) - 1."""
        xs = np.linspace(-5, 5, 21)
        np.testing.assert_allclose(tanh_phi(xs), 2.0 * sigmoid(2.0 * xs) - 1.0, atol=1e-12)

    def test_relu(self):
        """Test the forward mask and its gradient."""
        x = np.array([-1.0, 0.0, 2.0])
        y, cache = relu_forward(x)
        np.testing.assert_array_equal(y, [0.0, 0.0, 2.0])
        np.testing.assert_array_equal(relu_backward(np.ones(3), cache), [0.0, 0.0, 1.0])


class TestConv2D:
    """Test convolution forward and backward."""

    def test_all_ones_kernel_sums_input(self):
        """Test a 3x3 input with a 3x3 ones kernel."""
        x = np.arange(9.0).reshape(1, 1, 3, 3)
        y, _ = conv2d_forward(x, np.ones((1, 1, 3, 3)), np.zeros(1))
        assert y.shape == (1, 1, 1, 1)
        assert y[0, 0, 0, 0] == 36.0

    def test_matches_naive_loop(self):
        """Test padded multi-channel convolution against direct summation."""
        rng = np.random.default_rng(0)
        x = rng.normal(size=(2, 3, 5, 6))
        w = rng.normal(size=(4, 3, 3, 3))
        b = rng.normal(size=4)
        y, _ = conv2d_forward(x, w, b, pad=1)
        np.testing.assert_allclose(y, naive_conv(x, w, b, 1), atol=1e-12)

    def test_gradients(self):
        """Test dx, dw and db against finite differences."""
        rng = np.random.default_rng(1)
        params = {"x": rng.normal(size=(2, 2, 4, 4)), "w": rng.normal(size=(3, 2, 3, 3)), "b": rng.normal(size=3)}
        upstream = rng.normal(size=(2, 3, 4, 4))

        def loss():
            y, _ = conv2d_forward(params["x"], params["w"], params["b"], pad=1)
            return float(np.sum(y * upstream))

        _, cache = conv2d_forward(params["x"], params["w"], params["b"], pad=1)
        dx, dw, db = conv2d_backward(upstream, cache)
        assert grad_check(loss, params, {"x": dx, "w": dw, "b": db}) < 1e-5

    def test_channel_mismatch(self):
        """Test that kernel channels must match the input."""
        with pytest.raises(ShapeError):
            conv2d_forward(np.zeros((1, 2, 4, 4)), np.zeros((1, 3, 3, 3)), np.zeros(1))

    def test_kernel_too_large(self):
        """Test an unpadded kernel bigger than the input."""
        with pytest.raises(ShapeError, match="larger"):
            conv2d_forward(np.zeros((1, 1, 2, 2)), np.zeros((1, 1, 3, 3)), np.zeros(1))


class TestMaxPool:
    """Test 2x2 max pooling."""

    def test_forward(self):
        """Test window maxima."""
        x = np.array([[1.0, 2.0, 5.0, 0.0], [3.0, 4.0, 1.0, 1.0]]).reshape(1, 1, 2, 4)
        y, _ = maxpool2x2_forward(x)
        np.testing.assert_array_equal(y.ravel(), [4.0, 5.0])

    def test_backward_routes_to_max(self):
        """Test that gradient reaches only the maximal input."""
        x = np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(1, 1, 2, 2)
        _, cache = maxpool2x2_forward(x)
        dx = maxpool2x2_backward(np.array([[[[7.0]]]]), cache)
        np.testing.assert_array_equal(dx.ravel(), [0.0, 0.0, 0.0, 7.0])

    def test_odd_extent(self):
        """Test that odd sizes keep the last row and column."""
        rng = np.random.default_rng(2)
        x = rng.normal(size=(1, 2, 5, 3))
        y, cache = maxpool2x2_forward(x)
        assert y.shape == (1, 2, 3, 2)
        assert y[0, 0, 2, 1] == x[0, 0, 4, 2]
        assert maxpool2x2_backward(np.ones_like(y), cache).shape == x.shape


class TestDenseAndLoss:
    """Test the dense layer and softmax cross-entropy."""

    def test_fc_gradients(self):
        """Test dense gradients against finite differences."""
        rng = np.random.default_rng(3)
        params = {"x": rng.normal(size=(3, 4)), "w": rng.normal(size=(2, 4)), "b": rng.normal(size=2)}
        upstream = rng.normal(size=(3, 2))

        def loss():
            y, _ = fc_forward(params["x"], params["w"], params["b"])
            return float(np.sum(y * upstream))

        _, cache = fc_forward(params["x"], params["w"], params["b"])
        dx, dw, db = fc_backward(upstream, cache)
        assert grad_check(loss, params, {"x": dx, "w": dw, "b": db}) < 1e-5

    def test_uniform_softmax(self):
        """Test equal logits give 1/3 each and loss ln 3."""
        np.testing.assert_allclose(softmax(np.zeros(3)), [1 / 3] * 3)
        loss, _ = softmax_cross_entropy(np.zeros((1, 3)), np.array([0]))
        assert loss == pytest.approx(math.log(3.0))

    def test_softmax_large_logits(self):
        """Test that max subtraction avoids overflow."""
        probs = softmax(np.array([1000.0, 1000.0]))
        np.testing.assert_allclose(probs, [0.5, 0.5])

    def test_cross_entropy_gradient(self):
        """Test the gradient is (p - onehot) / N."""
        logits = np.array([[1.0, 2.0, 0.5], [0.0, -1.0, 3.0]])
        _, grad = softmax_cross_entropy(logits, np.array([1, 2]))
        expected = softmax(logits)
        expected[[0, 1], [1, 2]] -= 1.0
        np.testing.assert_allclose(grad, expected / 2.0)

    def test_label_range(self):
        """Test labels outside [0, K)."""
        with pytest.raises(ValueError, match="out of range"):
            softmax_cross_entropy(np.zeros((1, 3)), np.array([3]))
