#  test_optim.py - this file is part of the infantcry_tools package.
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
from numpy.testing import assert_allclose
from infantcry_tools.common.exceptions import ShapeMismatch
from infantcry_tools.nn.layers import Linear
from infantcry_tools.nn.optim import AdamState, adam_step, Adam


class TestAdamStep:

    def test_first_step_moves_by_lr(self):
        p = {"w": np.array([1.0, -2.0, 3.0])}
        adam_step(p, {"w": np.array([0.5, -4.0, 1e-3])}, AdamState(lr=0.1))
        # bias-corrected first step is lr * sign(g) up to eps
        assert_allclose(p["w"], [0.9, -1.9, 2.9], atol=1e-5)

    def test_matches_reference_two_steps(self):
        p = {"w": np.array([0.5])}
        state = AdamState(lr=0.01)
        grads = [np.array([0.2]), np.array([-0.1])]
        m = v = 0.0
        ref = 0.5
        for t, g in enumerate(grads, start=1):
            adam_step(p, {"w": g}, state)
            m = 0.9 * m + 0.1 * g[0]
            v = 0.999 * v + 0.001 * g[0] ** 2
            ref -= 0.01 * (m / (1 - 0.9 ** t)) / (np.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
        assert state.step == 2
        assert_allclose(p["w"][0], ref, rtol=1e-12)

    def test_zero_gradient(self):
        p = {"w": np.array([0.25, -1.5])}
        state = adam_step(p, {"w": np.zeros(2)}, AdamState(lr=0.1))
        assert_allclose(p["w"], [0.25, -1.5], rtol=0, atol=0)
        assert state.step == 1

    def test_minimizes_square(self):
        p = {"x": np.array([1.0])}
        state = AdamState(lr=0.1)
        for _ in range(200):
            adam_step(p, {"x": 2.0 * p["x"]}, state)
        assert abs(p["x"][0]) < 0.05

    def test_updates_in_place(self):
        w = np.ones(2, dtype=np.float32)
        adam_step({"w": w}, {"w": np.ones(2)}, AdamState())
        assert w.dtype == np.float32
        assert np.all(w < 1.0)

    def test_mismatched_names(self):
        with pytest.raises(ShapeMismatch):
            adam_step({"w": np.ones(2)}, {"v": np.ones(2)}, AdamState())

    def test_mismatched_shapes(self):
        with pytest.raises(ShapeMismatch):
            adam_step({"w": np.ones(2)}, {"w": np.ones(3)}, AdamState())


class TestAdam:

    def test_fits_linear_regression(self, rng):
        layer = Linear(3, 1, rng=rng)
        x = rng.standard_normal((64, 3)).astype(np.float32)
        y = x @ np.array([[1.0], [-2.0], [0.5]], dtype=np.float32) + 0.3
        opt = Adam(layer, lr=0.05)
        for _ in range(500):
            layer.zero_grad()
            err = layer.forward(x, train=True) - y
            layer.backward(2.0 * err / len(x))
            opt.step()
        assert_allclose(layer.params["weight"][0], [1.0, -2.0, 0.5], atol=0.05)
        assert_allclose(layer.params["bias"], [0.3], atol=0.05)
