#  pooling.py - this file is part of the infantcry_tools package.
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
from ..common.exceptions import ConfigError, EmptySequence, HeadMismatch, ShapeMismatch
from .layers import Layer, Linear


def _check_sequence(H):
    H = np.asarray(H)
    if H.ndim < 2:
        raise ShapeMismatch("Pooling input must be (..., instances, dim), got {}.".format(H.shape))
    if H.shape[-2] == 0:
        raise EmptySequence("Cannot pool an empty sequence.")
    return H


def pool_max(H):
    """Element-wise maximum over the instances axis (-2)."""
    return _check_sequence(H).max(axis=-2)


def pool_avg(H):
    """Element-wise mean over the instances axis (-2)."""
    H = _check_sequence(H)
    return H.mean(axis=-2, dtype=np.float64).astype(H.dtype, copy=False)


def pool_add(H):
    """max + avg."""
    return pool_max(H) + pool_avg(H)


def statistic_features(H):
    """Concatenation of per-dimension mean and population variance.

    Parameters
    ----------
    H : numpy ndarray
        instances (..., N, D)

    Returns
    -------
    numpy ndarray
        (..., 2D) [mean, variance]
    """
    H = _check_sequence(H)
    mean = H.mean(axis=-2, dtype=np.float64)
    var = ((H - np.expand_dims(mean, -2)) ** 2).mean(axis=-2)

    return np.concatenate((mean, var), axis=-1).astype(H.dtype, copy=False)


def statistic_backward(H, grad_stats):
    """Input gradient of `statistic_features`."""
    H = _check_sequence(H)
    dim = H.shape[-1]
    n = H.shape[-2]
    grad_stats = np.asarray(grad_stats)
    g_mean, g_var = grad_stats[..., :dim], grad_stats[..., dim:]
    centered = H - H.mean(axis=-2, dtype=np.float64, keepdims=True)

    return (np.expand_dims(g_mean, -2) + 2.0 * centered * np.expand_dims(g_var, -2)) / n


def _check_fc(dim, fc_weight, fc_bias):
    if fc_weight.shape != (dim, 2 * dim) or (fc_bias is not None and fc_bias.shape != (dim, )):
        raise ShapeMismatch("Statistic projection must map {} to {}, got weight {}.".format(
            2 * dim, dim, fc_weight.shape))


def pool_statistic(H, fc_weight, fc_bias=None):
    """Learned projection of the [mean, variance] statistics back to D."""
    H = _check_sequence(H)
    _check_fc(H.shape[-1], fc_weight, fc_bias)
    out = statistic_features(H) @ fc_weight.T
    if fc_bias is not None:
        out = out + fc_bias
    return out


def _check_heads(dim, heads):
    heads = np.asarray(heads)
    if heads.ndim != 2 or heads.shape[0] < 1:
        raise HeadMismatch("Attention scores must be (heads, dim / heads), got {}.".format(heads.shape))
    k = heads.shape[0]
    if dim % k != 0 or heads.shape[1] != dim // k:
        raise HeadMismatch("Dimension {} is not split evenly over {} heads of size {}.".format(
            dim, k, heads.shape[1]))
    return heads


def _attention_parts(H, heads):
    k, dk = heads.shape
    Hk = H.astype(np.float64).reshape(H.shape[:-1] + (k, dk))
    e = np.einsum("...nkd,kd->...nk", Hk, heads)
    alpha = np.exp(e - e.max(axis=-2, keepdims=True))
    a = alpha / alpha.sum(axis=-2, keepdims=True)
    pooled = np.einsum("...nk,...nkd->...kd", a, Hk)

    return Hk, a, pooled


def pool_attention(H, heads):
    """Multi-head attention pooling.

    The dimension D is split into K sub-spaces of size D / K; head k scores
    every instance on its sub-space, normalizes the scores with a
    max-subtracted softmax over the instances and returns the weighted sum.
    Heads outputs are concatenated back to D.

    Parameters
    ----------
    H : numpy ndarray
        instances (..., N, D)
    heads : numpy ndarray
        score vectors (K, D / K)

    Returns
    -------
    numpy ndarray
        pooled vector (..., D)
    """
    H = _check_sequence(H)
    heads = _check_heads(H.shape[-1], heads)
    _, _, pooled = _attention_parts(H, heads)

    return pooled.reshape(pooled.shape[:-2] + (H.shape[-1], )).astype(H.dtype, copy=False)


def attention_weights(H, heads):
    """Softmax weights (..., N, K) of `pool_attention`."""
    H = _check_sequence(H)
    heads = _check_heads(H.shape[-1], heads)
    return _attention_parts(H, heads)[1]


def pool(kind, H, fc_weight=None, fc_bias=None, heads=None):
    """Dispatch on the head name."""
    if kind == "max":
        return pool_max(H)
    if kind == "avg":
        return pool_avg(H)
    if kind == "add":
        return pool_add(H)
    if kind == "statistic":
        return pool_statistic(H, fc_weight, fc_bias)
    if kind == "attention":
        return pool_attention(H, heads)
    raise ConfigError("Unknown pooling head {}, use one of: {}.".format(kind, ", ".join(defines.POOL_HEADS)))


def _max_backward(H, grad_out):
    # ties route to the first maximal instance
    idx = np.expand_dims(H.argmax(axis=-2), -2)
    grad = np.zeros(H.shape, dtype=np.result_type(H, grad_out))
    np.put_along_axis(grad, idx, np.expand_dims(grad_out, -2), axis=-2)
    return grad


def _avg_backward(H, grad_out):
    n = H.shape[-2]
    return np.broadcast_to(np.expand_dims(grad_out, -2) / n, H.shape).copy()


def pool_backward(kind, H, grad_out, fc_weight=None, fc_bias=None, heads=None):
    """Gradients of `pool` with respect to its input and parameters.

    Returns
    -------
    grad_H : numpy ndarray
        (..., N, D)
    param_grads : dict
        `fc_weight` and `fc_bias` for statistic, `heads` for attention
    """
    H = _check_sequence(H)
    grad_out = np.asarray(grad_out)
    if kind == "max":
        return _max_backward(H, grad_out), {}
    if kind == "avg":
        return _avg_backward(H, grad_out), {}
    if kind == "add":
        return _max_backward(H, grad_out) + _avg_backward(H, grad_out), {}
    if kind == "statistic":
        dim = H.shape[-1]
        _check_fc(dim, fc_weight, fc_bias)
        z = statistic_features(H).astype(np.float64)
        g_flat = grad_out.reshape(-1, dim)
        params = {"fc_weight": g_flat.T @ z.reshape(-1, 2 * dim)}
        if fc_bias is not None:
            params["fc_bias"] = g_flat.sum(axis=0)
        return statistic_backward(H, grad_out @ fc_weight), params
    if kind == "attention":
        heads = _check_heads(H.shape[-1], heads)
        k, dk = heads.shape
        Hk, a, pooled = _attention_parts(H, heads)
        gk = grad_out.reshape(grad_out.shape[:-1] + (k, dk))
        s = np.einsum("...nkd,...kd->...nk", Hk - np.expand_dims(pooled, -3), gk)
        a_s = a * s
        grad_Hk = a[..., None] * np.expand_dims(gk, -3) + a_s[..., None] * heads
        grad_heads = np.einsum("bnk,bnkd->kd", a_s.reshape((-1, ) + a_s.shape[-2:]),
                               Hk.reshape((-1, ) + Hk.shape[-3:]))
        return grad_Hk.reshape(H.shape), {"heads": grad_heads}
    raise ConfigError("Unknown pooling head {}, use one of: {}.".format(kind, ", ".join(defines.POOL_HEADS)))


class PoolHead(Layer):
    """Pooling head over (batch, instances, dim) embeddings.

    Parameters
    ----------
    kind : str
        one of max, avg, add, statistic, attention
    dim : int
        embedding dimension D
    heads : int, optional
        attention heads K (default : 4)
    rng : numpy Generator, optional
        initializer of the statistic projection
    """

    def __init__(self, kind, dim, heads=defines.DEFAULT_ATTENTION_HEADS, rng=None):
        super(PoolHead, self).__init__()
        if kind not in defines.POOL_HEADS:
            raise ConfigError("Unknown pooling head {}, use one of: {}.".format(kind, ", ".join(defines.POOL_HEADS)))
        self.kind = kind
        self.dim = dim
        self.fc = None
        if kind == "statistic":
            self.fc = Linear(2 * dim, dim, rng=rng)
        elif kind == "attention":
            if heads < 1 or dim % heads != 0:
                raise HeadMismatch("Dimension {} is not divisible by {} heads.".format(dim, heads))
            # zero scores start as plain averaging
            self.params["scores"] = np.zeros((heads, dim // heads), dtype=np.float32)
        self.zero_grad()
        self._H = None

    def children(self):
        return [("fc", self.fc)] if self.fc is not None else []

    def forward(self, x, train=False):
        H = _check_sequence(x)
        if H.shape[-1] != self.dim:
            raise ShapeMismatch("Pooling head expects dimension {}, got {}.".format(self.dim, H.shape[-1]))
        self._H = H
        if self.kind == "statistic":
            return self.fc.forward(statistic_features(H), train)
        if self.kind == "attention":
            return pool_attention(H, self.params["scores"])
        return pool(self.kind, H)

    def backward(self, grad_out):
        H = self._H
        if self.kind == "statistic":
            return statistic_backward(H, self.fc.backward(grad_out)).astype(grad_out.dtype, copy=False)
        if self.kind == "attention":
            grad_H, params = pool_backward("attention", H, grad_out, heads=self.params["scores"])
            self.grads["scores"] += params["heads"]
            return grad_H.astype(grad_out.dtype, copy=False)
        return pool_backward(self.kind, H, grad_out)[0]
