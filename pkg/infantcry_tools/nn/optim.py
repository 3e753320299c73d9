#  optim.py - this file is part of the infantcry_tools package.
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


from dataclasses import dataclass, field
import numpy as np
from ..common import defines
from ..common.exceptions import ShapeMismatch


@dataclass
class AdamState(object):
    """Adam moments and step counter, keyed by parameter name."""
    lr: float = defines.ADAM_LR
    beta1: float = defines.ADAM_BETA1
    beta2: float = defines.ADAM_BETA2
    eps: float = defines.ADAM_EPS
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params, grads, state):
    """One bias-corrected Adam update, applied in place.

    Parameters
    ----------
    params : dict
        name -> parameter array
    grads : dict
        name -> gradient array, same keys and shapes as `params`
    state : AdamState
        optimizer state, updated in place

    Returns
    -------
    AdamState
        the updated state
    """
    if set(params.keys()) != set(grads.keys()):
        raise ShapeMismatch("Parameters and gradients have different names.")
    state.step += 1
    c1 = 1.0 - state.beta1 ** state.step
    c2 = 1.0 - state.beta2 ** state.step
    for name, p in params.items():
        g = np.asarray(grads[name], dtype=np.float64)
        if g.shape != p.shape:
            raise ShapeMismatch("Gradient of {} has shape {}, expected {}.".format(name, g.shape, p.shape))
        m = state.m.get(name, np.zeros(p.shape))
        v = state.v.get(name, np.zeros(p.shape))
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * g * g
        state.m[name] = m
        state.v[name] = v
        p -= (state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)).astype(p.dtype)

    return state


class Adam(object):
    """Adam optimizer bound to a layer tree.

    Parameters
    ----------
    layer : Layer
        model whose parameters are updated
    lr : float, optional
        learning rate (default : 1e-3)
    """

    def __init__(self, layer, lr=defines.ADAM_LR):
        self.layer = layer
        self.state = AdamState(lr=lr)

    def step(self):
        adam_step(dict(self.layer.named_parameters()), dict(self.layer.named_gradients()), self.state)
