#  int8.py - this file is part of the infantcry_tools package.
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
from ..common import defines


class QuantizedTensor(object):
    """Symmetric per-tensor int8 tensor.

    Parameters
    ----------
    values : numpy ndarray
        int8 values in [-127, 127]
    scale : float
        positive step, dequantized = values * scale
    """

    def __init__(self, values, scale):
        self.values = np.asarray(values, dtype=np.int8)
        self.scale = float(scale)

    @property
    def shape(self):
        return self.values.shape

    @property
    def size(self):
        return self.values.size

    def dequantize(self, dtype=np.float32):
        return (self.values.astype(np.float64) * self.scale).astype(dtype)

    def __repr__(self):
        return "QuantizedTensor(shape={}, scale={!r})".format(self.shape, self.scale)


def round_half_away_from_zero(x):
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def quantize_array(x):
    """Quantize an array with scale max|x| / 127 (1.0 for an all-zero array).

    Returns
    -------
    values : numpy ndarray
        int8 values
    scale : float
        quantization step
    """
    x = np.asarray(x, dtype=np.float64)
    amax = float(np.max(np.abs(x))) if x.size > 0 else 0.0
    if amax == 0.0:
        return np.zeros(x.shape, dtype=np.int8), 1.0
    q = round_half_away_from_zero(x * (defines.QUANT_LEVELS / amax))
    q = np.clip(q, -defines.QUANT_LEVELS, defines.QUANT_LEVELS).astype(np.int8)

    return q, amax / defines.QUANT_LEVELS


def quantize_tensor(w):
    """Quantize a weight tensor.

    Parameters
    ----------
    w : numpy ndarray
        float weights

    Returns
    -------
    QuantizedTensor
        int8 weights and their scale
    """
    values, scale = quantize_array(w)
    return QuantizedTensor(values, scale)


def dequantize(qt, dtype=np.float64):
    """Float tensor values * scale."""
    return qt.dequantize(dtype)


def int8_matmul(a_q, w_q):
    """Integer product a_q @ w_q.T accumulated in int32.

    Parameters
    ----------
    a_q : numpy ndarray
        int8 activations (rows, k)
    w_q : numpy ndarray
        int8 weights (out, k)

    Returns
    -------
    numpy ndarray
        int32 accumulators (rows, out)
    """
    return np.matmul(a_q.astype(np.int32), w_q.astype(np.int32).T)
