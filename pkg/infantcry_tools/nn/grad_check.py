#  grad_check.py - this file is part of the infantcry_tools package.
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


import copy
import logging
from dataclasses import dataclass
import numpy as np

logger = logging.getLogger(__name__)

MIN_SUBSAMPLE = 200


@dataclass
class GradCheckReport(object):
    max_rel_err: float
    passed: bool
    n_coords: int
    worst: str

    def __bool__(self):
        return self.passed


def _relative_error(a, n, floor):
    return abs(a - n) / max(abs(a), abs(n), floor)


def grad_check(fragment, x, tolerance=1e-4, h=1e-3, train=True, max_coords=2000, seed=0, floor=1e-3):
    """Compare backprop gradients against central finite differences.

    The fragment is deep-copied and cast to float64; the scalar objective is
    sum(forward(x) * R) for a fixed random R, so every output coordinate
    contributes.

    Parameters
    ----------
    fragment : Layer
        network fragment (layer, block or model)
    x : numpy ndarray
        input batch
    tolerance : float, optional
        pass threshold on the maximum relative error (default : 1e-4)
    h : float, optional
        finite difference step (default : 1e-3)
    train : bool, optional
        forward mode (default : True)
    max_coords : int, optional
        above this many coordinates a random subsample of this size is checked
        (default : 2000)
    seed : int, optional
        seed for the projection and the subsample (default : 0)
    floor : float, optional
        denominator floor of the relative error (default : 1e-3)

    Returns
    -------
    GradCheckReport
        maximum relative error and pass flag
    """
    net = copy.deepcopy(fragment).astype(np.float64)
    x = np.array(x, dtype=np.float64)
    rng = np.random.default_rng(seed)

    out = net.forward(x, train)
    proj = rng.uniform(-1.0, 1.0, size=out.shape)
    net.zero_grad()
    grad_x = net.backward(proj)

    tensors = [("input", x, grad_x)]
    params = dict(net.named_parameters())
    for name, g in net.named_gradients():
        tensors.append((name, params[name], np.array(g, dtype=np.float64)))

    coords = [(t, i) for t, (_, arr, _) in enumerate(tensors) for i in range(arr.size)]
    if len(coords) > max_coords:
        picked = rng.choice(len(coords), size=max(max_coords, MIN_SUBSAMPLE), replace=False)
        coords = [coords[i] for i in sorted(picked)]

    def objective():
        return float(np.sum(net.forward(x, train) * proj))

    max_err = 0.0
    worst = ""
    for t, i in coords:
        name, arr, grad = tensors[t]
        flat = arr.reshape(-1)
        orig = flat[i]
        flat[i] = orig + h
        plus = objective()
        flat[i] = orig - h
        minus = objective()
        flat[i] = orig
        err = _relative_error(grad.reshape(-1)[i], (plus - minus) / (2.0 * h), floor)
        if err > max_err:
            max_err, worst = err, name

    logger.debug("Gradient check over %d coordinates, max relative error %.3e (%s)", len(coords), max_err, worst)

    return GradCheckReport(max_rel_err=max_err, passed=bool(max_err < tolerance), n_coords=len(coords), worst=worst)
