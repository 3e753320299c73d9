#  training.py - this file is part of the infantcry_tools package.
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


import hashlib
import logging
import zlib
from dataclasses import dataclass, field
import numpy as np
from ..common import defines
from ..common.exceptions import EmptyDataset, NumericError, ShapeMismatch
from ..models import serialization
from ..nn.layers import softmax, cross_entropy
from ..nn.optim import Adam
from ..utils import audio_utils, signal_utils

logger = logging.getLogger(__name__)


@dataclass
class Dataset(object):
    """Featurized clips.

    Parameters
    ----------
    features : numpy ndarray
        log-mel inputs (n_clips, 1, frames, n_mels)
    labels : numpy ndarray
        class indices (n_clips, )
    paths : list[str]
        clip paths, in the same order
    label_set : list[str]
        ordered class names
    """
    features: np.ndarray
    labels: np.ndarray
    paths: list = field(default_factory=list)
    label_set: list = field(default_factory=list)

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.shape[0] != self.labels.shape[0]:
            raise ShapeMismatch("{} feature rows for {} labels.".format(self.features.shape[0], self.labels.shape[0]))

    def __len__(self):
        return int(self.labels.shape[0])

    def subset(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        paths = [self.paths[i] for i in idx] if self.paths else []
        return Dataset(self.features[idx], self.labels[idx], paths, list(self.label_set))


@dataclass
class History(object):
    loss_curve: list = field(default_factory=list)
    eval_accuracy_curve: list = field(default_factory=list)
    data_order_hash: str = ""


@dataclass
class Metrics(object):
    """Evaluation summary.

    Confusion rows are true classes, columns predicted classes.
    """
    accuracy: float
    per_class_accuracy: list
    confusion_matrix: list
    labels: list
    n_eval: int
    loss_curve: list = field(default_factory=list)
    eval_accuracy_curve: list = field(default_factory=list)

    def to_dict(self):
        return {
            defines.ACCURACY_KEY: self.accuracy,
            defines.PER_CLASS_KEY: self.per_class_accuracy,
            defines.CONFUSION_KEY: self.confusion_matrix,
            defines.LABELS_KEY: self.labels,
            defines.COUNT_KEY: self.n_eval,
            defines.LOSS_CURVE_KEY: self.loss_curve,
            defines.EVAL_CURVE_KEY: self.eval_accuracy_curve
        }


def sub_seed(seed, name):
    """Named sub-seed derived from the run seed (data, init, shuffle, ...)."""
    return (int(seed) * 1000003 + zlib.crc32(name.encode("utf-8"))) & 0x7FFFFFFF


def array_hash(*arrays):
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()[:16]


def state_hash(model, prefix="body."):
    """Short digest of the model tensors whose name starts with `prefix`."""
    return array_hash(*[v.values if hasattr(v, "values") else v
                        for k, v in model.state_dict().items() if k.startswith(prefix)])


def featurize_clips(paths, labels, label_set, n_mels=defines.N_MELS, clip_seconds=defines.DEFAULT_CLIP_SECONDS):
    """Load wav files and compute their log-mel inputs.

    Clips are zero-padded or truncated to `clip_seconds` first, so every
    feature matrix has the same number of frames.

    Returns
    -------
    Dataset
        features (n_clips, 1, frames, n_mels)
    """
    if len(paths) == 0:
        raise EmptyDataset("No clips to featurize.")
    target_len = int(round(clip_seconds * defines.SAMPLE_RATE))
    features = []
    for p in paths:
        clip = audio_utils.load_wav(p)
        features.append(signal_utils.clip_features(clip, n_mels=n_mels, target_len=target_len))
    logger.info("Featurized %d clips (%d frames x %d mels)", len(paths), features[0].shape[0], n_mels)

    return Dataset(np.stack(features)[:, None, :, :], np.asarray(labels), list(paths), list(label_set))


def _batches(order, batch_size):
    # a trailing single-clip batch joins the previous one (batch norm needs two)
    starts = list(range(0, len(order), batch_size))
    batches = [order[s:s + batch_size] for s in starts]
    if len(batches) > 1 and len(batches[-1]) == 1:
        batches[-2] = np.concatenate((batches[-2], batches[-1]))
        batches.pop()
    return batches


def cross_entropy_loss(logits, labels, idx):
    return cross_entropy(softmax(logits.astype(np.float64)), labels)


def fit(model, train, epochs, batch_size=32, lr=defines.ADAM_LR, seed=1, loss_fn=None, eval_set=None,
        dump_path=None):
    """Mini-batch Adam training.

    Parameters
    ----------
    model : Model
        model updated in place (single writer)
    train : Dataset
        training clips
    epochs : int
        passes over the data
    batch_size : int, optional
        clips per step (default : 32)
    lr : float, optional
        Adam learning rate (default : 1e-3)
    seed : int, optional
        run seed, the shuffle order uses its "shuffle" sub-seed (default : 1)
    loss_fn : callable, optional
        (logits, labels, clip indices) -> (loss, grad wrt logits);
        cross-entropy when None
    eval_set : Dataset, optional
        evaluated after every epoch (default : None)
    dump_path : str, optional
        where the model is dumped if the loss stops being finite (default : None)

    Returns
    -------
    History
        per-epoch train loss and eval accuracy

    Raises
    ------
    NumericError
        on a non-finite loss, after dumping the model
    """
    if len(train) == 0:
        raise EmptyDataset("Training set is empty.")
    loss_fn = loss_fn if loss_fn is not None else cross_entropy_loss
    rng = np.random.default_rng(sub_seed(seed, "shuffle"))
    optimizer = Adam(model, lr=lr)
    history = History()
    order_digest = hashlib.sha256()
    n = len(train)

    for epoch in range(1, epochs + 1):
        order = rng.permutation(n)
        order_digest.update(order.tobytes())
        total = 0.0
        for idx in _batches(order, batch_size):
            model.zero_grad()
            logits = model.forward_logits(train.features[idx], train=True)
            loss, grad = loss_fn(logits, train.labels[idx], idx)
            if not np.isfinite(loss):
                if dump_path is not None:
                    serialization.save_model(model, dump_path)
                raise NumericError("Loss became {} at epoch {:d}; model dumped to {}.".format(loss, epoch, dump_path))
            model.backward_logits(grad.astype(logits.dtype))
            optimizer.step()
            total += loss * len(idx)
        history.loss_curve.append(total / n)
        if eval_set is not None and len(eval_set) > 0:
            history.eval_accuracy_curve.append(evaluate(model, eval_set).accuracy)
            logger.info("Epoch %d/%d: train loss %.4f, eval accuracy %.4f", epoch, epochs, history.loss_curve[-1],
                        history.eval_accuracy_curve[-1])
        else:
            logger.info("Epoch %d/%d: train loss %.4f", epoch, epochs, history.loss_curve[-1])

    history.data_order_hash = order_digest.hexdigest()[:16]
    logger.info("Data order hash %s", history.data_order_hash)

    return history


def predict(model, data, batch_size=64):
    """Eval-mode class probabilities for every clip of `data`."""
    return model.predict(data.features, batch_size=batch_size)


def confusion(labels, predictions, n_classes):
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (np.asarray(labels, dtype=np.int64), np.asarray(predictions, dtype=np.int64)), 1)
    return cm


def metrics_from_predictions(labels, predictions, label_set):
    """Accuracy, per-class accuracy and confusion matrix.

    Per-class accuracy is None for classes absent from `labels`.
    """
    n_classes = len(label_set)
    cm = confusion(labels, predictions, n_classes)
    total = int(cm.sum())
    if total == 0:
        raise EmptyDataset("Nothing to evaluate.")
    row_sums = cm.sum(axis=1)
    per_class = [float(cm[k, k] / row_sums[k]) if row_sums[k] > 0 else None for k in range(n_classes)]

    return Metrics(accuracy=float(np.trace(cm) / total), per_class_accuracy=per_class,
                   confusion_matrix=cm.tolist(), labels=list(label_set), n_eval=total)


def evaluate(model, data, batch_size=64):
    """Metrics of `model` on `data` (eval mode, deterministic)."""
    if len(data) == 0:
        raise EmptyDataset("Evaluation set is empty.")
    predictions = np.argmax(predict(model, data, batch_size), axis=1)
    label_set = data.label_set if data.label_set else model.config.labels

    return metrics_from_predictions(data.labels, predictions, label_set)
