#  distillation.py - this file is part of the infantcry_tools package.
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
from dataclasses import dataclass
import numpy as np
from ..common import defines
from ..common.exceptions import ConfigError, ShapeMismatch, EmptyDataset
from ..nn.layers import softmax, log_softmax, cross_entropy
from ..algorithms import training

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DistillConfig(object):
    """Distillation temperature and mixing weight.

    Parameters
    ----------
    temperature : float
        softmax temperature applied to both logits in the KL term
    kd_lambda : float
        weight of the KL term, 1 - kd_lambda weights the label cross-entropy
    """
    temperature: float = defines.KD_TEMPERATURE
    kd_lambda: float = defines.KD_LAMBDA

    def __post_init__(self):
        if not self.temperature > 0:
            raise ConfigError("Temperature must be positive, got {}.".format(self.temperature))
        if not 0.0 <= self.kd_lambda <= 1.0:
            raise ConfigError("kd_lambda must lie in [0, 1], got {}.".format(self.kd_lambda))


def kd_kl(student_logits, teacher_logits, temperature):
    """Mean KL(softmax(teacher / T) || softmax(student / T)) over the batch."""
    s = np.asarray(student_logits, dtype=np.float64) / temperature
    t = np.asarray(teacher_logits, dtype=np.float64) / temperature
    log_qt = log_softmax(t)
    rows = np.sum(np.exp(log_qt) * (log_qt - log_softmax(s)), axis=1)

    return float(np.mean(np.maximum(rows, 0.0)))


def kd_loss(student_logits, teacher_logits, labels, temperature=defines.KD_TEMPERATURE,
            kd_lambda=defines.KD_LAMBDA):
    """Distillation loss and its gradient with respect to the student logits.

    loss = (1 - kd_lambda) * CE(softmax(s), labels)
           + kd_lambda * T^2 * KL(softmax(t / T) || softmax(s / T))

    Parameters
    ----------
    student_logits : numpy ndarray
        (batch, classes)
    teacher_logits : numpy ndarray
        (batch, classes), treated as constants
    labels : numpy ndarray
        true classes (batch, )
    temperature : float, optional
        T (default : 2.0)
    kd_lambda : float, optional
        mixing weight (default : 0.5)

    Returns
    -------
    loss : float
        batch mean loss
    grad : numpy ndarray
        gradient with respect to `student_logits`
    """
    s = np.asarray(student_logits, dtype=np.float64)
    t = np.asarray(teacher_logits, dtype=np.float64)
    if s.ndim != 2 or s.shape != t.shape:
        raise ShapeMismatch("Student logits {} and teacher logits {} differ.".format(s.shape, t.shape))
    if temperature <= 0:
        raise ConfigError("Temperature must be positive, got {}.".format(temperature))
    n = s.shape[0]

    ce, grad_ce = cross_entropy(softmax(s), labels)
    loss = (1.0 - kd_lambda) * ce
    grad = (1.0 - kd_lambda) * grad_ce
    if kd_lambda > 0:
        q_s = softmax(s / temperature)
        q_t = softmax(t / temperature)
        loss += kd_lambda * temperature ** 2 * kd_kl(s, t, temperature)
        grad = grad + kd_lambda * temperature * (q_s - q_t) / n

    return float(loss), grad


def teacher_logits(teacher, data, batch_size=64):
    """Eval-mode logits of the frozen teacher for every clip."""
    return np.concatenate([teacher.forward_logits(data.features[i:i + batch_size], train=False)
                           for i in range(0, len(data), batch_size)], axis=0).astype(np.float64)


def distill(teacher, student, train, epochs, config=None, batch_size=32, lr=defines.ADAM_LR, seed=1,
            eval_set=None, dump_path=None):
    """Train `student` on the labels and the temperature-softened teacher outputs.

    The teacher is only run forward in eval mode, so its tensors are never
    touched.

    Parameters
    ----------
    teacher : Model
        frozen teacher
    student : Model
        student, updated in place
    train : Dataset
        training clips
    epochs : int
        passes over the data
    config : DistillConfig, optional
        temperature and mixing weight (default : T 2.0, lambda 0.5)

    Returns
    -------
    student : Model
        trained student
    history : History
        per-epoch loss and eval accuracy
    """
    if len(train) == 0:
        raise EmptyDataset("Distillation set is empty.")
    config = config if config is not None else DistillConfig()
    if teacher.config.n_classes != student.config.n_classes:
        raise ShapeMismatch("Teacher has {} classes, student {}.".format(teacher.config.n_classes,
                                                                        student.config.n_classes))
    soft_targets = teacher_logits(teacher, train)
    logger.info("Distilling %s into %s (T=%.2f, lambda=%.2f)", teacher.config.arch, student.config.arch,
                config.temperature, config.kd_lambda)

    def loss_fn(logits, labels, idx):
        return kd_loss(logits, soft_targets[idx], labels, config.temperature, config.kd_lambda)

    history = training.fit(student, train, epochs, batch_size=batch_size, lr=lr, seed=seed, loss_fn=loss_fn,
                           eval_set=eval_set, dump_path=dump_path)

    return student, history
