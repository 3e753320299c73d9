#  architectures.py - this file is part of the infantcry_tools package.
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


import logging
from dataclasses import dataclass, field
from fractions import Fraction
import numpy as np
from ..common import defines
from ..common.exceptions import (ConfigError, InvalidWidth, InputTooSmall, ShapeMismatch, HeadMismatch,
                                 CheckpointMismatch)
from ..nn.layers import Layer, Sequential, Conv3x3, Conv1x1, BatchNorm, ReLU, AvgPool2x2, Linear, softmax, \
    softmax_backward
from ..nn.pooling import PoolHead

logger = logging.getLogger(__name__)

BASE_WIDTHS = {
    "CNN10": defines.CNN10_WIDTHS,
    "CNN14": defines.CNN14_WIDTHS,
    "ResNet22": defines.RESNET22_WIDTHS + [defines.RESNET22_POST_WIDTH]
}

# canonical order of the config text block
CONFIG_FIELDS = ["arch", "width_mult", "n_mels", "n_classes", "pool_head", "heads", "task", "clip_seconds"]


def parse_width(width_mult):
    """Rational width multiplier from str ("1/8"), int, float or Fraction."""
    try:
        w = Fraction(width_mult).limit_denominator(1 << 16) if isinstance(width_mult, float) \
            else Fraction(width_mult)
    except (ValueError, TypeError, ZeroDivisionError):
        raise InvalidWidth("Width multiplier {!r} is not a rational number.".format(width_mult))
    if w <= 0:
        raise InvalidWidth("Width multiplier must be positive, got {}.".format(w))
    return w


def scaled_widths(arch, width_mult):
    """Channel widths of every stage for a width multiplier.

    Raises
    ------
    InvalidWidth
        if a scaled width is not a positive integer
    """
    w = parse_width(width_mult)
    widths = []
    for base in BASE_WIDTHS[arch]:
        scaled = base * w
        if scaled.denominator != 1 or scaled < 1:
            raise InvalidWidth("Width multiplier {} gives {} channels for base width {}.".format(w, scaled, base))
        widths.append(int(scaled))
    return widths


@dataclass(frozen=True)
class ModelConfig(object):
    """Architecture hyper-parameters stored with every model.

    Parameters
    ----------
    arch : str
        CNN10, CNN14 or ResNet22
    width_mult : Fraction
        channel width multiplier
    n_mels : int
        input mel bins
    n_classes : int
        output classes
    pool_head : str
        max, avg, add, statistic or attention
    heads : int
        attention heads
    task : str
        task whose label set the outputs follow
    clip_seconds : float
        clip length the model was trained on
    """
    arch: str = "CNN10"
    width_mult: Fraction = Fraction(1, 8)
    n_mels: int = defines.N_MELS
    n_classes: int = 2
    pool_head: str = "statistic"
    heads: int = defines.DEFAULT_ATTENTION_HEADS
    task: str = "detect"
    clip_seconds: float = defines.DEFAULT_CLIP_SECONDS
    embed_dim: int = field(default=0, compare=False)

    def __post_init__(self):
        if self.arch not in defines.ARCHS:
            raise ConfigError("Architecture can only be: {}".format(", ".join(defines.ARCHS)))
        if self.pool_head not in defines.POOL_HEADS:
            raise ConfigError("Pooling head can only be: {}".format(", ".join(defines.POOL_HEADS)))
        if self.task not in defines.TASKS:
            raise ConfigError("Task can only be: {}".format(", ".join(defines.TASKS)))
        if int(self.n_mels) < 1:
            raise ConfigError("n_mels must be positive, got {}.".format(self.n_mels))
        if int(self.n_classes) != len(defines.LABEL_SETS[self.task]):
            raise ConfigError("Task {} has {} classes, got n_classes={}.".format(
                self.task, len(defines.LABEL_SETS[self.task]), self.n_classes))
        object.__setattr__(self, "width_mult", parse_width(self.width_mult))
        object.__setattr__(self, "n_mels", int(self.n_mels))
        object.__setattr__(self, "n_classes", int(self.n_classes))
        object.__setattr__(self, "heads", int(self.heads))
        object.__setattr__(self, "clip_seconds", float(self.clip_seconds))
        embed_dim = scaled_widths(self.arch, self.width_mult)[-1]
        if self.pool_head == "attention" and (self.heads < 1 or embed_dim % self.heads != 0):
            raise HeadMismatch("Embedding dimension {} is not divisible by {} heads.".format(embed_dim, self.heads))
        object.__setattr__(self, "embed_dim", embed_dim)

    @property
    def labels(self):
        return defines.LABEL_SETS[self.task]

    def to_text(self):
        """Canonical key=value text, one entry per line."""
        return "".join("{}={}\n".format(k, getattr(self, k)) for k in CONFIG_FIELDS)

    @classmethod
    def from_text(cls, text):
        values = {}
        for line in text.splitlines():
            if not line.strip():
                continue
            key, sep, value = line.partition("=")
            if not sep or key not in CONFIG_FIELDS:
                raise ConfigError("Bad config line {!r}.".format(line))
            values[key] = value
        missing = [k for k in CONFIG_FIELDS if k not in values]
        if missing:
            raise ConfigError("Missing config keys: {}".format(", ".join(missing)))
        return cls(arch=values["arch"], width_mult=Fraction(values["width_mult"]), n_mels=int(values["n_mels"]),
                   n_classes=int(values["n_classes"]), pool_head=values["pool_head"], heads=int(values["heads"]),
                   task=values["task"], clip_seconds=float(values["clip_seconds"]))


class ConvBlock(Layer):
    """[conv3x3-BN-ReLU] x n_convs, optionally followed by 2x2 average pooling."""

    def __init__(self, in_ch, out_ch, rng, n_convs=2, pool=True):
        super(ConvBlock, self).__init__()
        self.items = []
        for i in range(n_convs):
            self.items.append(("conv{:d}".format(i + 1), Conv3x3(in_ch if i == 0 else out_ch, out_ch, rng=rng)))
            self.items.append(("bn{:d}".format(i + 1), BatchNorm(out_ch)))
            self.items.append(("relu{:d}".format(i + 1), ReLU()))
        if pool:
            self.items.append(("pool", AvgPool2x2()))

    def children(self):
        return self.items

    def forward(self, x, train=False):
        for _, layer in self.items:
            x = layer.forward(x, train)
        return x

    def backward(self, grad_out):
        for _, layer in reversed(self.items):
            grad_out = layer.backward(grad_out)
        return grad_out


class BasicBlock(Layer):
    """Residual block conv-BN-ReLU-conv-BN plus shortcut, then ReLU.

    The shortcut is the identity when channels match, a 1x1 projection
    followed by batch norm otherwise.
    """

    def __init__(self, in_ch, out_ch, rng):
        super(BasicBlock, self).__init__()
        self.conv1 = Conv3x3(in_ch, out_ch, rng=rng)
        self.bn1 = BatchNorm(out_ch)
        self.relu1 = ReLU()
        self.conv2 = Conv3x3(out_ch, out_ch, rng=rng)
        self.bn2 = BatchNorm(out_ch)
        self.shortcut = None
        if in_ch != out_ch:
            self.shortcut = Sequential([Conv1x1(in_ch, out_ch, rng=rng), BatchNorm(out_ch)])
        self.relu_out = ReLU()

    def children(self):
        items = [("conv1", self.conv1), ("bn1", self.bn1), ("conv2", self.conv2), ("bn2", self.bn2)]
        if self.shortcut is not None:
            items.append(("shortcut", self.shortcut))
        return items

    def forward(self, x, train=False):
        y = self.relu1.forward(self.bn1.forward(self.conv1.forward(x, train), train))
        y = self.bn2.forward(self.conv2.forward(y, train), train)
        s = x if self.shortcut is None else self.shortcut.forward(x, train)
        return self.relu_out.forward(y + s)

    def backward(self, grad_out):
        g = self.relu_out.backward(grad_out)
        gy = self.conv1.backward(self.bn1.backward(self.relu1.backward(self.conv2.backward(self.bn2.backward(g)))))
        gs = g if self.shortcut is None else self.shortcut.backward(g)
        return gy + gs


class FrequencyMean(Layer):
    """(batch, channels, frames, mels) -> (batch, frames, channels) by averaging the mel axis."""

    def __init__(self):
        super(FrequencyMean, self).__init__()
        self._n_freq = None

    def forward(self, x, train=False):
        self._n_freq = x.shape[3]
        return x.mean(axis=3).transpose(0, 2, 1)

    def backward(self, grad_out):
        g = grad_out.transpose(0, 2, 1)[..., None] / self._n_freq
        return np.repeat(g, self._n_freq, axis=3)


class Model(Layer):
    """Convolutional body, frequency averaging, pooling head and linear classifier.

    Parameters
    ----------
    config : ModelConfig
        architecture hyper-parameters
    body : Sequential
        convolutional stages
    head : PoolHead
        pooling over the time frames
    classifier : Linear
        embedding to class logits
    """

    def __init__(self, config, body, head, classifier):
        super(Model, self).__init__()
        self.config = config
        self.body = body
        self.frequency_mean = FrequencyMean()
        self.head = head
        self.classifier = classifier
        self._probs = None

    def children(self):
        return [("body", self.body), ("head", self.head), ("classifier", self.classifier)]

    @property
    def n_pool_stages(self):
        return sum(1 for _, layer in self.body.walk() if isinstance(layer, AvgPool2x2))

    def check_input(self, x):
        if x.ndim != 4 or x.shape[1] != 1 or x.shape[3] != self.config.n_mels:
            raise ShapeMismatch("Model expects (batch, 1, frames, {}), got {}.".format(self.config.n_mels, x.shape))
        min_frames = 2 ** self.n_pool_stages
        if x.shape[2] < min_frames:
            raise InputTooSmall("{} needs at least {} frames, got {}.".format(self.config.arch, min_frames,
                                                                              x.shape[2]))

    def forward_logits(self, x, train=False):
        self.check_input(x)
        h = self.frequency_mean.forward(self.body.forward(x, train), train)
        return self.classifier.forward(self.head.forward(h, train), train)

    def forward(self, x, train=False):
        self._probs = softmax(self.forward_logits(x, train))
        return self._probs

    def backward_logits(self, grad_logits):
        g = self.head.backward(self.classifier.backward(grad_logits))
        return self.body.backward(self.frequency_mean.backward(g))

    def backward(self, grad_out):
        return self.backward_logits(softmax_backward(self._probs, grad_out))

    def predict(self, x, batch_size=64):
        """Eval-mode probabilities, computed in batches."""
        x = np.asarray(x)
        if x.shape[0] == 0:
            return np.zeros((0, self.config.n_classes))
        return np.concatenate([self.forward(x[i:i + batch_size], train=False)
                               for i in range(0, x.shape[0], batch_size)], axis=0)

    def conv_param_count(self):
        return int(sum(v.size for name, v in self.state_dict().items()
                       if name.startswith("body.") and name.endswith("weight")
                       and len(v.shape) in (2, 4)))


def _rngs(seed):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3)]


def _build_body(config, rng):
    widths = scaled_widths(config.arch, config.width_mult)
    if config.arch in ("CNN10", "CNN14"):
        blocks = []
        in_ch = 1
        for w in widths:
            blocks.append(ConvBlock(in_ch, w, rng))
            in_ch = w
        return Sequential(blocks)

    # ResNet22
    block_widths, post_width = widths[:-1], widths[-1]
    items = [ConvBlock(1, block_widths[0], rng, n_convs=1, pool=False)]
    in_ch = block_widths[0]
    for i, w in enumerate(block_widths):
        items.append(BasicBlock(in_ch, w, rng))
        if i in defines.RESNET22_POOL_AFTER:
            items.append(AvgPool2x2())
        in_ch = w
    items.append(ConvBlock(in_ch, post_width, rng, pool=False))
    return Sequential(items)


def build_model(config, seed=0):
    """Build a freshly initialized model.

    Body, pooling head and classifier draw from separate generators, so models
    differing only in the pooling head share their convolutional weights.

    Parameters
    ----------
    config : ModelConfig
        architecture hyper-parameters
    seed : int, optional
        initialization seed (default : 0)

    Returns
    -------
    Model
        He-uniform weights, BN gamma 1 and beta 0, zero biases
    """
    body_rng, head_rng, cls_rng = _rngs(seed)
    body = _build_body(config, body_rng)
    head = PoolHead(config.pool_head, config.embed_dim, heads=config.heads, rng=head_rng)
    classifier = Linear(config.embed_dim, config.n_classes, rng=cls_rng)
    model = Model(config, body, head, classifier)
    logger.debug("Built %s width %s with %s head, %d parameters", config.arch, config.width_mult,
                 config.pool_head, model.param_count())

    return model


def forward(model, batch):
    """Eval-mode class probabilities (batch, n_classes)."""
    return model.forward(np.asarray(batch), train=False)


def param_count(model):
    return model.param_count()


def transfer_body(source, target):
    """Copy every convolutional and batch norm tensor of `source` into `target`.

    Raises
    ------
    CheckpointMismatch
        if the two bodies do not have the same architecture
    """
    s, t = source.config, target.config
    if (s.arch, s.width_mult, s.n_mels) != (t.arch, t.width_mult, t.n_mels):
        raise CheckpointMismatch("Checkpoint is {} width {} with {} mels, model is {} width {} with {} mels.".format(
            s.arch, s.width_mult, s.n_mels, t.arch, t.width_mult, t.n_mels))
    body_state = {k[len("body."):]: v for k, v in source.state_dict().items() if k.startswith("body.")}
    target.body.load_state_dict(body_state)
