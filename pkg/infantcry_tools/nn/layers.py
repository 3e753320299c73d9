#  layers.py - this file is part of the infantcry_tools package.
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
from collections import OrderedDict
import numpy as np
from ..common import defines
from ..common.exceptions import ShapeMismatch, DegenerateBatch, NotNormalized
from ..compression import int8


def he_uniform(shape, fan_in, rng):
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(np.float32)


# functional ops

def _im2col(x):
    n, c, h, w = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    win = np.lib.stride_tricks.sliding_window_view(xp, (3, 3), axis=(2, 3))

    return win.transpose(0, 2, 3, 1, 4, 5).reshape(n * h * w, c * 9)


def _col2im(gcols, shape):
    n, c, h, w = shape
    gc = gcols.reshape(n, h, w, c, 3, 3).transpose(0, 3, 4, 5, 1, 2)
    gxp = np.zeros((n, c, h + 2, w + 2), dtype=gcols.dtype)
    for i in range(3):
        for j in range(3):
            gxp[:, :, i:i + h, j:j + w] += gc[:, :, i, j]

    return gxp[:, :, 1:-1, 1:-1]


def _check_conv_shapes(x, weight):
    if x.ndim != 4:
        raise ShapeMismatch("Conv input must be (batch, channels, rows, cols), got {}.".format(x.shape))
    if weight.ndim != 4 or weight.shape[2:] != (3, 3) or weight.shape[1] != x.shape[1]:
        raise ShapeMismatch("Conv weight {} does not fit input {}.".format(weight.shape, x.shape))


def conv3x3_forward(x, weight, bias=None):
    """3x3 convolution, stride 1, zero padding 1.

    Parameters
    ----------
    x : numpy ndarray
        input (batch, in_ch, rows, cols)
    weight : numpy ndarray
        kernels (out_ch, in_ch, 3, 3)
    bias : numpy ndarray, optional
        per output channel bias (default : None)

    Returns
    -------
    numpy ndarray
        output (batch, out_ch, rows, cols)
    """
    _check_conv_shapes(x, weight)
    n, _, h, w = x.shape
    out_ch = weight.shape[0]
    out = _im2col(x) @ weight.reshape(out_ch, -1).T
    if bias is not None:
        out = out + bias

    return out.reshape(n, h, w, out_ch).transpose(0, 3, 1, 2)


def conv3x3_backward(x, weight, grad_out, cols=None):
    """Gradients of `conv3x3_forward`.

    Returns
    -------
    grad_x : numpy ndarray
        input gradient
    grad_w : numpy ndarray
        kernels gradient
    grad_b : numpy ndarray
        bias gradient
    """
    _check_conv_shapes(x, weight)
    out_ch = weight.shape[0]
    if cols is None:
        cols = _im2col(x)
    g = grad_out.transpose(0, 2, 3, 1).reshape(-1, out_ch)
    grad_w = (g.T @ cols).reshape(weight.shape)
    grad_b = g.sum(axis=0)
    grad_x = _col2im(g @ weight.reshape(out_ch, -1), x.shape)

    return grad_x, grad_w, grad_b


def batchnorm_forward(x, gamma, beta, running_mean, running_var, train,
                      momentum=defines.BN_MOMENTUM, eps=defines.BN_EPS):
    """Per-channel batch normalization over (batch, rows, cols).

    In training mode batch statistics (biased variance) normalize the input and
    the running buffers are updated in place as
    running = momentum * running + (1 - momentum) * batch.

    Returns
    -------
    out : numpy ndarray
        normalized input
    cache : tuple
        values needed by `batchnorm_backward`
    """
    axes = (0, 2, 3)
    if train:
        m = x.shape[0] * x.shape[2] * x.shape[3]
        if m < 2:
            raise DegenerateBatch("Batch norm needs more than one value per channel in training.")
        mean = x.mean(axis=axes, dtype=np.float64)
        var = ((x - mean[None, :, None, None]) ** 2).mean(axis=axes, dtype=np.float64)
        running_mean *= momentum
        running_mean += (1.0 - momentum) * mean
        running_var *= momentum
        running_var += (1.0 - momentum) * var
    else:
        mean = running_mean.astype(np.float64)
        var = running_var.astype(np.float64)
    inv_std = 1.0 / np.sqrt(var + eps)
    x_hat = (x - mean[None, :, None, None]) * inv_std[None, :, None, None]
    out = gamma[None, :, None, None] * x_hat + beta[None, :, None, None]

    return out.astype(x.dtype, copy=False), (x_hat, inv_std, gamma, train)


def batchnorm_backward(grad_out, cache):
    """Gradients of `batchnorm_forward`.

    Returns
    -------
    grad_x, grad_gamma, grad_beta : numpy ndarray
    """
    x_hat, inv_std, gamma, train = cache
    axes = (0, 2, 3)
    grad_gamma = (grad_out * x_hat).sum(axis=axes)
    grad_beta = grad_out.sum(axis=axes)
    g_hat = grad_out * gamma[None, :, None, None]
    if train:
        grad_x = (g_hat - g_hat.mean(axis=axes, keepdims=True)
                  - x_hat * (g_hat * x_hat).mean(axis=axes, keepdims=True)) * inv_std[None, :, None, None]
    else:
        grad_x = g_hat * inv_std[None, :, None, None]

    return grad_x.astype(grad_out.dtype, copy=False), grad_gamma, grad_beta


def relu(x):
    return np.maximum(x, 0)


def avgpool2x2(x):
    """2x2 average pooling, stride 2; odd rows / cols repeat their edge first."""
    _, _, h, w = x.shape
    pad = ((0, 0), (0, 0), (0, h % 2), (0, w % 2))
    if h % 2 or w % 2:
        x = np.pad(x, pad, mode="edge")
    n, c, hp, wp = x.shape

    return x.reshape(n, c, hp // 2, 2, wp // 2, 2).mean(axis=(3, 5))


def avgpool2x2_backward(grad_out, in_shape):
    _, _, h, w = in_shape
    g = np.repeat(np.repeat(grad_out, 2, axis=2), 2, axis=3) * 0.25
    if h % 2:
        g[:, :, h - 1, :] += g[:, :, h, :]
        g = g[:, :, :h, :]
    if w % 2:
        g[:, :, :, w - 1] += g[:, :, :, w]
        g = g[:, :, :, :w]

    return g


def softmax(z, axis=-1):
    """Max-subtracted softmax."""
    z = np.asarray(z)
    e = np.exp(z - z.max(axis=axis, keepdims=True))

    return e / e.sum(axis=axis, keepdims=True)


def log_softmax(z, axis=-1):
    z = np.asarray(z)
    shifted = z - z.max(axis=axis, keepdims=True)

    return shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))


def softmax_backward(probs, grad_probs):
    return probs * (grad_probs - (grad_probs * probs).sum(axis=-1, keepdims=True))


def cross_entropy(probs, labels):
    """Mean cross-entropy of softmax outputs.

    Parameters
    ----------
    probs : numpy ndarray
        class probabilities (batch, classes), rows summing to 1
    labels : numpy ndarray
        integer labels (batch, )

    Returns
    -------
    loss : float
        mean -log(p[label])
    grad_logits : numpy ndarray
        (probs - onehot) / batch
    """
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if probs.ndim != 2 or labels.shape != (probs.shape[0], ):
        raise ShapeMismatch("Probabilities {} and labels {} do not match.".format(probs.shape, labels.shape))
    if np.any(np.abs(probs.sum(axis=1) - 1.0) > 1e-5):
        raise NotNormalized("Probability rows must sum to 1.")
    n = probs.shape[0]
    rows = np.arange(n)
    loss = -np.mean(np.log(np.maximum(probs[rows, labels], 1e-12)))
    grad = probs.copy()
    grad[rows, labels] -= 1.0

    return float(loss), grad / n


# layers

class Layer(object):
    """Base class of the network pieces.

    Parameters live in `params`, their gradients (same names) in `grads`,
    non-trainable state in `buffers`. Composite layers list their sub-layers
    in `children`.
    """

    def __init__(self):
        self.params = OrderedDict()
        self.grads = OrderedDict()
        self.buffers = OrderedDict()

    def forward(self, x, train=False):
        raise NotImplementedError

    def backward(self, grad_out):
        raise NotImplementedError

    def children(self):
        return []

    def local_state(self):
        state = OrderedDict(self.params)
        state.update(self.buffers)
        return state

    def load_local(self, name, value):
        if name in self.params:
            target = self.params
        elif name in self.buffers:
            target = self.buffers
        else:
            raise KeyError(name)
        if target[name].shape != value.shape:
            raise ShapeMismatch("Tensor {} has shape {}, expected {}.".format(name, value.shape, target[name].shape))
        target[name] = np.array(value, dtype=target[name].dtype)

    def walk(self, prefix=""):
        """Yield (prefix, layer) pairs, depth first, self included."""
        yield prefix, self
        for name, child in self.children():
            yield from child.walk("{}{}.".format(prefix, name))

    def named_parameters(self):
        for prefix, layer in self.walk():
            for k, v in layer.params.items():
                yield prefix + k, v

    def named_gradients(self):
        for prefix, layer in self.walk():
            for k in layer.params.keys():
                yield prefix + k, layer.grads[k]

    def named_buffers(self):
        for prefix, layer in self.walk():
            for k, v in layer.buffers.items():
                yield prefix + k, v

    def zero_grad(self):
        for _, layer in self.walk():
            layer.grads = OrderedDict((k, np.zeros_like(v)) for k, v in layer.params.items())

    def state_dict(self):
        state = OrderedDict()
        for prefix, layer in self.walk():
            for k, v in layer.local_state().items():
                state[prefix + k] = v
        return state

    def load_state_dict(self, state, strict=True):
        """Copy tensors by name; with `strict`, names must match exactly."""
        owners = {}
        for prefix, layer in self.walk():
            for k in layer.local_state().keys():
                owners[prefix + k] = (layer, k)
        if strict and set(owners.keys()) != set(state.keys()):
            missing = sorted(set(owners.keys()) - set(state.keys()))
            unexpected = sorted(set(state.keys()) - set(owners.keys()))
            raise ShapeMismatch("State mismatch, missing {}, unexpected {}.".format(missing, unexpected))
        for name, value in state.items():
            if name in owners:
                layer, k = owners[name]
                layer.load_local(k, value)

    def astype(self, dtype):
        for _, layer in self.walk():
            layer.params = OrderedDict((k, v.astype(dtype)) for k, v in layer.params.items())
            layer.buffers = OrderedDict((k, v.astype(dtype)) for k, v in layer.buffers.items())
        self.zero_grad()
        return self

    def param_count(self):
        """Trainable tensor sizes (int8 weights included, buffers excluded)."""
        total = 0
        for _, layer in self.walk():
            total += sum(v.size for k, v in layer.local_state().items() if k not in layer.buffers)
        return int(total)

    def clone(self):
        return copy.deepcopy(self)


class _Int8Weighted(Layer):
    """Layer whose `weight` may be replaced by a QuantizedTensor."""

    def __init__(self):
        super(_Int8Weighted, self).__init__()
        self.qweight = None

    @property
    def quantized(self):
        return self.qweight is not None

    def quantize_weight(self):
        self.qweight = int8.quantize_tensor(self.params.pop("weight"))
        self.grads.pop("weight", None)

    def weight_shape(self):
        return self.qweight.shape if self.quantized else self.params["weight"].shape

    def local_state(self):
        state = OrderedDict()
        if self.quantized:
            state["weight"] = self.qweight
        state.update(super(_Int8Weighted, self).local_state())
        return state

    def load_local(self, name, value):
        if name == "weight" and isinstance(value, int8.QuantizedTensor):
            if value.shape != self.weight_shape():
                raise ShapeMismatch("Tensor weight has shape {}, expected {}.".format(value.shape,
                                                                                   self.weight_shape()))
            self.params.pop("weight", None)
            self.grads.pop("weight", None)
            self.qweight = value
        elif name == "weight" and self.quantized:
            if value.shape != self.qweight.shape:
                raise ShapeMismatch("Tensor weight has shape {}, expected {}.".format(value.shape,
                                                                                   self.qweight.shape))
            self.qweight = None
            new_params = OrderedDict(weight=np.array(value, dtype=np.float32))
            new_params.update(self.params)
            self.params = new_params
        else:
            super(_Int8Weighted, self).load_local(name, value)

    def _int8_product(self, rows):
        # dynamic per-tensor activation scale, int32 accumulation
        a_q, a_scale = int8.quantize_array(rows)
        w_q = self.qweight.values.reshape(self.qweight.shape[0], -1)
        acc = int8.int8_matmul(a_q, w_q)

        return (acc.astype(np.float64) * (self.qweight.scale * a_scale)).astype(np.float32)


class Conv3x3(_Int8Weighted):
    """3x3 convolution with stride 1 and zero padding 1."""

    def __init__(self, in_ch, out_ch, bias=False, rng=None):
        super(Conv3x3, self).__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        self.params["weight"] = he_uniform((out_ch, in_ch, 3, 3), in_ch * 9, rng)
        if bias:
            self.params["bias"] = np.zeros(out_ch, dtype=np.float32)
        self.zero_grad()
        self._cache = None

    def forward(self, x, train=False):
        if self.quantized:
            _check_conv_shapes(x, self.qweight.values)
            n, _, h, w = x.shape
            out = self._int8_product(_im2col(x))
            if "bias" in self.params:
                out = out + self.params["bias"]
            return out.reshape(n, h, w, -1).transpose(0, 3, 1, 2)
        weight = self.params["weight"]
        _check_conv_shapes(x, weight)
        n, _, h, w = x.shape
        cols = _im2col(x)
        out = cols @ weight.reshape(weight.shape[0], -1).T
        if "bias" in self.params:
            out = out + self.params["bias"]
        self._cache = (x, cols)

        return out.reshape(n, h, w, weight.shape[0]).transpose(0, 3, 1, 2)

    def backward(self, grad_out):
        x, cols = self._cache
        grad_x, grad_w, grad_b = conv3x3_backward(x, self.params["weight"], grad_out, cols=cols)
        self.grads["weight"] += grad_w
        if "bias" in self.params:
            self.grads["bias"] += grad_b

        return grad_x


class Linear(_Int8Weighted):
    """Fully connected layer y = x W^T + b over the last axis."""

    def __init__(self, in_dim, out_dim, bias=True, rng=None, zero_init=False):
        super(Linear, self).__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        if zero_init:
            self.params["weight"] = np.zeros((out_dim, in_dim), dtype=np.float32)
        else:
            self.params["weight"] = he_uniform((out_dim, in_dim), in_dim, rng)
        if bias:
            self.params["bias"] = np.zeros(out_dim, dtype=np.float32)
        self.zero_grad()
        self._cache = None

    def forward(self, x, train=False):
        in_dim = self.weight_shape()[1]
        if x.shape[-1] != in_dim:
            raise ShapeMismatch("Linear layer expects {} inputs, got {}.".format(in_dim, x.shape[-1]))
        lead = x.shape[:-1]
        rows = x.reshape(-1, in_dim)
        if self.quantized:
            out = self._int8_product(rows)
        else:
            out = rows @ self.params["weight"].T
            self._cache = rows
        if "bias" in self.params:
            out = out + self.params["bias"]

        return out.reshape(lead + (out.shape[-1], ))

    def backward(self, grad_out):
        rows = self._cache
        weight = self.params["weight"]
        g = grad_out.reshape(-1, weight.shape[0])
        self.grads["weight"] += g.T @ rows
        if "bias" in self.params:
            self.grads["bias"] += g.sum(axis=0)

        return (g @ weight).reshape(grad_out.shape[:-1] + (weight.shape[1], ))


class Conv1x1(Linear):
    """1x1 convolution (channel mixing), used by residual projections."""

    def __init__(self, in_ch, out_ch, rng=None):
        super(Conv1x1, self).__init__(in_ch, out_ch, bias=False, rng=rng)

    def forward(self, x, train=False):
        out = super(Conv1x1, self).forward(x.transpose(0, 2, 3, 1), train)
        return out.transpose(0, 3, 1, 2)

    def backward(self, grad_out):
        grad_x = super(Conv1x1, self).backward(grad_out.transpose(0, 2, 3, 1))
        return grad_x.transpose(0, 3, 1, 2)


class BatchNorm(Layer):
    """Per-channel batch normalization for (batch, channels, rows, cols)."""

    def __init__(self, channels, momentum=defines.BN_MOMENTUM, eps=defines.BN_EPS):
        super(BatchNorm, self).__init__()
        self.params["gamma"] = np.ones(channels, dtype=np.float32)
        self.params["beta"] = np.zeros(channels, dtype=np.float32)
        self.buffers["running_mean"] = np.zeros(channels, dtype=np.float32)
        self.buffers["running_var"] = np.ones(channels, dtype=np.float32)
        self.momentum = momentum
        self.eps = eps
        self.zero_grad()
        self._cache = None

    def forward(self, x, train=False):
        if x.ndim != 4 or x.shape[1] != self.params["gamma"].shape[0]:
            raise ShapeMismatch("Batch norm over {} channels got input {}.".format(
                self.params["gamma"].shape[0], x.shape))
        out, self._cache = batchnorm_forward(x, self.params["gamma"], self.params["beta"],
                                             self.buffers["running_mean"], self.buffers["running_var"],
                                             train, self.momentum, self.eps)
        return out

    def backward(self, grad_out):
        grad_x, grad_gamma, grad_beta = batchnorm_backward(grad_out, self._cache)
        self.grads["gamma"] += grad_gamma
        self.grads["beta"] += grad_beta

        return grad_x


class ReLU(Layer):

    def __init__(self):
        super(ReLU, self).__init__()
        self._mask = None

    def forward(self, x, train=False):
        self._mask = x > 0
        return np.where(self._mask, x, 0).astype(x.dtype, copy=False)

    def backward(self, grad_out):
        return grad_out * self._mask


class AvgPool2x2(Layer):

    def __init__(self):
        super(AvgPool2x2, self).__init__()
        self._in_shape = None

    def forward(self, x, train=False):
        self._in_shape = x.shape
        return avgpool2x2(x)

    def backward(self, grad_out):
        return avgpool2x2_backward(grad_out, self._in_shape)


class Softmax(Layer):

    def __init__(self):
        super(Softmax, self).__init__()
        self._probs = None

    def forward(self, x, train=False):
        self._probs = softmax(x)
        return self._probs

    def backward(self, grad_out):
        return softmax_backward(self._probs, grad_out)


class Sequential(Layer):
    """Chain of layers, named by position."""

    def __init__(self, layers):
        super(Sequential, self).__init__()
        self.items = list(layers)

    def children(self):
        return [(str(i), layer) for i, layer in enumerate(self.items)]

    def __len__(self):
        return len(self.items)

    def __getitem__(self, i):
        return self.items[i]

    def forward(self, x, train=False):
        for layer in self.items:
            x = layer.forward(x, train)
        return x

    def backward(self, grad_out):
        for layer in reversed(self.items):
            grad_out = layer.backward(grad_out)
        return grad_out
