#  test_layers.py - this file is part of the infantcry_tools package.
#  Copyright (C) 2024- infantcry_tools developers
#
#  This program is free software: you can redistribute it and/or modify
#  it under the terms of the GNU General Public License as published by
#  the Free Software Foundation, either version 3 of the License, or
#  (at your option) any later version.
#
#  This program is distributed in the hope that it will be useful,
#  but WITHOUT ANY WARRANTY; without even the implied warranty of
#  MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE. See the
#  GNU General Public License for more details.
#
#  You should have received a copy of the GNU General Public License
#  along with this program. If not, see <https://www.gnu.org/licenses/>.


import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from infantcry_tools.common.exceptions import ShapeMismatch, DegenerateBatch, NotNormalized
from infantcry_tools.nn.layers import (conv3x3_forward, conv3x3_backward, batchnorm_forward, avgpool2x2,
                                       avgpool2x2_backward, softmax, log_softmax, cross_entropy, Conv3x3, Linear,
                                       Conv1x1, BatchNorm, ReLU, Sequential)


def naive_conv(x, w, b=None):
    n, c, h, wd = x.shape
    out_ch = w.shape[0]
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    out = np.zeros((n, out_ch, h, wd))
    for i in range(h):
        for j in range(wd):
            patch = xp[:, :, i:i + 3, j:j + 3]
            out[:, :, i, j] = np.einsum("ncij,ocij->no", patch, w)
    if b is not None:
        out += b[None, :, None, None]
    return out


class TestConv3x3:

    def test_matches_naive(self, rng):
        x = rng.standard_normal((2, 3, 5, 4))
        w = rng.standard_normal((4, 3, 3, 3))
        b = rng.standard_normal(4)
        assert_allclose(conv3x3_forward(x, w, b), naive_conv(x, w, b), atol=1e-10)

    def test_backward_is_adjoint(self, rng):
        x = rng.standard_normal((2, 3, 5, 4))
        w = rng.standard_normal((4, 3, 3, 3))
        g = rng.standard_normal((2, 4, 5, 4))
        gx, gw, gb = conv3x3_backward(x, w, g)
        # <conv(x), g> is linear in x and in w
        assert_allclose(np.sum(gx * x), np.sum(conv3x3_forward(x, w) * g))
        assert_allclose(np.sum(gw * w), np.sum(conv3x3_forward(x, w) * g))
        assert_allclose(gb, g.sum(axis=(0, 2, 3)))

    def test_shape_mismatch(self, rng):
        with pytest.raises(ShapeMismatch):
            conv3x3_forward(rng.standard_normal((1, 2, 4, 4)), rng.standard_normal((4, 3, 3, 3)))

    def test_layer_accumulates_gradients(self, rng):
        layer = Conv3x3(2, 3, bias=True, rng=rng)
        x = rng.standard_normal((1, 2, 4, 4)).astype(np.float32)
        g = np.ones((1, 3, 4, 4), dtype=np.float32)
        layer.forward(x, train=True)
        layer.backward(g)
        first = layer.grads["weight"].copy()
        layer.forward(x, train=True)
        layer.backward(g)
        assert_allclose(layer.grads["weight"], 2 * first, rtol=1e-5)
        layer.zero_grad()
        assert not layer.grads["weight"].any()


class TestBatchNorm:

    def test_train_normalizes(self, rng):
        x = rng.standard_normal((4, 3, 5, 5)) * 3.0 + 2.0
        out, _ = batchnorm_forward(x, np.ones(3), np.zeros(3), np.zeros(3), np.ones(3), train=True)
        assert_allclose(out.mean(axis=(0, 2, 3)), 0.0, atol=1e-10)
        assert_allclose(out.var(axis=(0, 2, 3)), 1.0, atol=1e-4)

    def test_running_statistics(self, rng):
        x = rng.standard_normal((4, 2, 3, 3)) + 5.0
        rm, rv = np.zeros(2), np.ones(2)
        batchnorm_forward(x, np.ones(2), np.zeros(2), rm, rv, train=True)
        assert_allclose(rm, 0.1 * x.mean(axis=(0, 2, 3)))
        assert_allclose(rv, 0.9 + 0.1 * x.var(axis=(0, 2, 3)))

    def test_eval_uses_running_statistics(self):
        x = np.full((1, 1, 2, 2), 3.0)
        out, _ = batchnorm_forward(x, np.array([2.0]), np.array([1.0]), np.array([1.0]), np.array([4.0]),
                                   train=False, eps=0.0)
        assert_allclose(out, 2.0 * (3.0 - 1.0) / 2.0 + 1.0)

    def test_degenerate_batch(self):
        with pytest.raises(DegenerateBatch):
            BatchNorm(2).forward(np.zeros((1, 2, 1, 1), dtype=np.float32), train=True)
        BatchNorm(2).forward(np.zeros((1, 2, 1, 1), dtype=np.float32), train=False)

    def test_running_stats_are_buffers(self):
        bn = BatchNorm(3)
        assert list(bn.params.keys()) == ["gamma", "beta"]
        assert list(bn.buffers.keys()) == ["running_mean", "running_var"]
        assert bn.param_count() == 6


class TestPoolingLayer:

    def test_even(self):
        x = np.arange(16, dtype=np.float64).reshape(1, 1, 4, 4)
        assert_array_equal(avgpool2x2(x)[0, 0], [[2.5, 4.5], [10.5, 12.5]])

    def test_odd_repeats_edge(self):
        x = np.arange(9, dtype=np.float64).reshape(1, 1, 3, 3)
        out = avgpool2x2(x)
        assert out.shape == (1, 1, 2, 2)
        assert_allclose(out[0, 0, 1, 1], 8.0)

    def test_backward_is_adjoint(self, rng):
        x = rng.standard_normal((2, 3, 5, 7))
        g = rng.standard_normal((2, 3, 3, 4))
        assert_allclose(np.sum(avgpool2x2_backward(g, x.shape) * x), np.sum(avgpool2x2(x) * g))


class TestSoftmaxCrossEntropy:

    def test_softmax_stable(self):
        p = softmax(np.array([[1000.0, 1000.0, -1000.0]]))
        assert_allclose(p, [[0.5, 0.5, 0.0]])
        assert_allclose(np.exp(log_softmax(np.array([[1.0, 2.0]]))), softmax(np.array([[1.0, 2.0]])))

    def test_cross_entropy(self):
        probs = np.array([[0.25, 0.75], [0.5, 0.5]])
        loss, grad = cross_entropy(probs, np.array([1, 0]))
        assert_allclose(loss, -(np.log(0.75) + np.log(0.5)) / 2)
        assert_allclose(grad, [[0.125, -0.125], [-0.25, 0.25]])

    def test_not_normalized(self):
        with pytest.raises(NotNormalized):
            cross_entropy(np.array([[0.2, 0.2]]), np.array([0]))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            cross_entropy(np.array([[0.5, 0.5]]), np.array([0, 1]))


class TestLayerTree:

    def test_linear_last_axis(self, rng):
        layer = Linear(4, 3, rng=rng)
        x = rng.standard_normal((2, 5, 4)).astype(np.float32)
        out = layer.forward(x)
        assert out.shape == (2, 5, 3)
        assert_allclose(out, x @ layer.params["weight"].T + layer.params["bias"], rtol=1e-5)

    def test_conv1x1_mixes_channels(self, rng):
        layer = Conv1x1(3, 2, rng=rng)
        x = rng.standard_normal((1, 3, 2, 2)).astype(np.float32)
        expected = np.einsum("oc,nchw->nohw", layer.params["weight"], x)
        assert_allclose(layer.forward(x), expected, rtol=1e-5)

    def test_relu_subgradient_at_zero(self):
        relu = ReLU()
        relu.forward(np.array([-1.0, 0.0, 2.0]))
        assert_array_equal(relu.backward(np.ones(3)), [0.0, 0.0, 1.0])

    def test_state_dict_names_and_round_trip(self, rng):
        net = Sequential([Conv3x3(1, 2, rng=rng), BatchNorm(2), ReLU()])
        state = net.state_dict()
        assert list(state.keys()) == ["0.weight", "1.gamma", "1.beta", "1.running_mean", "1.running_var"]
        other = Sequential([Conv3x3(1, 2, rng=np.random.default_rng(99)), BatchNorm(2), ReLU()])
        other.load_state_dict(state)
        assert_array_equal(other.state_dict()["0.weight"], state["0.weight"])

    def test_strict_load_rejects_missing(self, rng):
        net = Sequential([Conv3x3(1, 2, rng=rng)])
        with pytest.raises(ShapeMismatch):
            net.load_state_dict({})
