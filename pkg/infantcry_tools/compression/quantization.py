#  quantization.py - this file is part of the infantcry_tools package.
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
import numpy as np
from ..common.exceptions import ValidationError
from ..models.architectures import Model
from ..nn.layers import Conv3x3, Conv1x1, Linear
from .int8 import QuantizedTensor, quantize_tensor, dequantize

logger = logging.getLogger(__name__)


class QuantizedModel(Model):
    """Inference-only model whose Conv3x3 and Linear weights are int8.

    Biases, batch norm tensors and attention scores stay float; activations
    entering a quantized layer are quantized per tensor at run time.
    """

    @classmethod
    def from_model(cls, model):
        return cls(model.config, model.body, model.head, model.classifier)

    def backward(self, grad_out):
        raise ValidationError("Quantized models are inference only.")

    def backward_logits(self, grad_logits):
        raise ValidationError("Quantized models are inference only.")


def quantize_model(model):
    """Symmetric per-tensor int8 quantization of every Conv3x3 and Linear weight.

    The source model is left untouched. 1x1 shortcut projections stay float.

    Parameters
    ----------
    model : Model
        float model

    Returns
    -------
    QuantizedModel
        same graph with int8 weights
    """
    qmodel = copy.deepcopy(model)
    n_quantized = 0
    for _, layer in qmodel.walk():
        if isinstance(layer, (Conv3x3, Linear)) and not isinstance(layer, Conv1x1) and not layer.quantized:
            layer.quantize_weight()
            n_quantized += 1
    logger.info("Quantized %d weight tensors of %s", n_quantized, model.config.arch)

    return QuantizedModel.from_model(qmodel)


def quantized_forward(qmodel, batch):
    """Eval-mode probabilities of a quantized model."""
    return qmodel.forward(np.asarray(batch), train=False)


def dequantize_model(qmodel):
    """Float model with the dequantized weights of `qmodel`."""
    model = copy.deepcopy(qmodel)
    state = {k: dequantize(v, np.float32) if isinstance(v, QuantizedTensor) else v
             for k, v in model.state_dict().items()}
    model.load_state_dict(state)

    return Model(model.config, model.body, model.head, model.classifier)
