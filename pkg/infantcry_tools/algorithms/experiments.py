#  experiments.py - this file is part of the infantcry_tools package.
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


import os
import logging
import numpy as np
import pandas as pd
from ..common import defines
from ..common.exceptions import ConfigError, CheckpointMismatch, LabelSetMismatch, EmptyDataset
from ..compression import distillation, quantization, report
from ..models import serialization
from ..models.architectures import ModelConfig, build_model, transfer_body
from ..summary_pages import run_page
from ..synth import synthdata
from ..utils import audio_utils, signal_utils, file_utils, plot_utils
from . import training

logger = logging.getLogger(__name__)


def model_config(cfg, arch=None, pool_head=None, task=None):
    """Model hyper-parameters of a run config, with optional overrides."""
    task = task if task is not None else cfg.task
    return ModelConfig(arch=arch if arch is not None else cfg.arch, width_mult=cfg.width_mult, n_mels=cfg.n_mels,
                       n_classes=len(defines.LABEL_SETS[task]),
                       pool_head=pool_head if pool_head is not None else cfg.pool_head, heads=cfg.heads, task=task,
                       clip_seconds=cfg.clip_seconds)


def load_data(cfg, label_set=None, n_mels=None, clip_seconds=None):
    """Featurized dataset of `cfg.data_dir` and the split of every clip.

    The `features.npz` cache is used when it matches the manifest and the
    front-end settings.

    Returns
    -------
    data : Dataset
        every manifest clip
    splits : numpy ndarray
        train / test tag of every clip
    """
    label_set = list(label_set if label_set is not None else defines.LABEL_SETS[cfg.task])
    n_mels = cfg.n_mels if n_mels is None else n_mels
    clip_seconds = cfg.clip_seconds if clip_seconds is None else clip_seconds
    df = file_utils.read_manifest(cfg.data_dir)
    labels = file_utils.label_indices(df[defines.LABEL_COL], label_set)
    paths = list(df[defines.PATH_COL])

    data = None
    cache = os.path.join(cfg.data_dir, defines.FEATURES_NAME)
    if os.path.exists(cache):
        cached = file_utils.load_features(cache)
        if cached["paths"] == paths and cached["n_mels"] == n_mels and cached["clip_seconds"] == clip_seconds:
            data = training.Dataset(cached["features"], labels, paths, label_set)
        else:
            logger.info("Feature cache %s does not match this run, recomputing", cache)
    if data is None:
        data = training.featurize_clips(paths, labels, label_set, n_mels, clip_seconds)

    return data, df[defines.SPLIT_COL].values


def train_test(cfg, label_set=None):
    """Train and test subsets; `train_per_class` keeps the first clips of each class."""
    data, splits = load_data(cfg, label_set)
    train_idx = np.flatnonzero(splits == "train")
    test_idx = np.flatnonzero(splits == "test")
    if cfg.train_per_class is not None:
        keep = []
        for k in range(len(data.label_set)):
            keep.extend(train_idx[data.labels[train_idx] == k][:cfg.train_per_class])
        train_idx = np.sort(np.asarray(keep, dtype=np.int64))
    if len(train_idx) == 0 or len(test_idx) == 0:
        raise EmptyDataset("Dataset {} needs both train and test clips.".format(cfg.data_dir))

    return data.subset(train_idx), data.subset(test_idx)


def warm_start(model, checkpoint):
    """Load every conv / batch norm tensor of `checkpoint` into `model`; the head keeps its fresh weights."""
    source = serialization.load_model(checkpoint)
    if isinstance(source, quantization.QuantizedModel):
        raise CheckpointMismatch("Cannot warm-start from the quantized model {}.".format(checkpoint))
    transfer_body(source, model)
    logger.info("Warm-started %s from %s", model.config.arch, checkpoint)


def train_run(cfg, train, test, arch=None, pool_head=None, warm_from=None, seed=None, out_dir=None):
    """Build, optionally warm-start, train and evaluate one model.

    Returns
    -------
    model : Model
        trained model
    metrics : Metrics
        test metrics with the training curves
    """
    seed = cfg.seed if seed is None else seed
    mcfg = model_config(cfg, arch=arch, pool_head=pool_head)
    model = build_model(mcfg, seed=training.sub_seed(seed, "init"))
    if warm_from is not None:
        warm_start(model, warm_from)
    logger.info("%s (%s head): %d parameters, body init hash %s", mcfg.arch, mcfg.pool_head, model.param_count(),
                training.state_hash(model))
    dump_path = None
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        dump_path = os.path.join(out_dir, defines.NAN_DUMP_NAME)
    history = training.fit(model, train, cfg.epochs, batch_size=cfg.batch_size, lr=cfg.lr, seed=seed,
                           eval_set=test, dump_path=dump_path)
    metrics = training.evaluate(model, test)
    metrics.loss_curve = history.loss_curve
    metrics.eval_accuracy_curve = history.eval_accuracy_curve

    return model, metrics


def write_run(out_dir, cfg, model=None, metrics=None, model_name=defines.MODEL_NAME):
    """Resolved config, model and metrics of a run."""
    os.makedirs(out_dir, exist_ok=True)
    cfg.save(out_dir)
    if model is not None:
        serialization.save_model(model, os.path.join(out_dir, model_name))
    if metrics is not None:
        file_utils.save_metrics(metrics.to_dict(), out_dir)


def cmd_synth(cfg):
    """Generate the synthetic dataset of `cfg.task` in `cfg.data_dir`."""
    df = synthdata.gen_dataset(cfg.task, cfg.n_per_class, cfg.seed, cfg.data_dir, duration_s=cfg.clip_seconds)
    cfg.save(cfg.data_dir)
    return df


def cmd_featurize(cfg):
    """Compute the log-mel features of the dataset and cache them."""
    df = file_utils.read_manifest(cfg.data_dir)
    label_set = defines.LABEL_SETS[cfg.task]
    labels = file_utils.label_indices(df[defines.LABEL_COL], label_set)
    data = training.featurize_clips(list(df[defines.PATH_COL]), labels, label_set, cfg.n_mels, cfg.clip_seconds)
    file_utils.save_features(data, os.path.join(cfg.data_dir, defines.FEATURES_NAME), cfg.n_mels,
                             cfg.clip_seconds)
    cfg.save(cfg.data_dir)
    return data


def cmd_train(cfg, out_dir):
    """Train a model, write model.icnm, metrics.json and config.yml.

    Returns
    -------
    dict
        test metrics
    """
    train, test = train_test(cfg)
    model, metrics = train_run(cfg, train, test, warm_from=cfg.pretrained_checkpoint, out_dir=out_dir)
    write_run(out_dir, cfg, model, metrics)
    logger.info("Test accuracy %.4f over %d clips", metrics.accuracy, metrics.n_eval)

    return metrics.to_dict()


def _require_model_path(cfg):
    if cfg.model_path is None:
        raise ConfigError("Set model_path to the model file to use.")
    return cfg.model_path


def cmd_eval(cfg, out_dir):
    """Evaluate `cfg.model_path` on the test clips (all clips without a split file)."""
    model = serialization.load_model(_require_model_path(cfg))
    mcfg = model.config
    try:
        data, splits = load_data(cfg, mcfg.labels, n_mels=mcfg.n_mels, clip_seconds=mcfg.clip_seconds)
    except LabelSetMismatch as e:
        raise LabelSetMismatch("Model predicts {} labels: {}".format(mcfg.task, e))
    idx = np.flatnonzero(splits == "test")
    if len(idx) > 0:
        data = data.subset(idx)
    metrics = training.evaluate(model, data)
    write_run(out_dir, cfg, metrics=metrics)
    logger.info("Eval accuracy %.4f over %d clips", metrics.accuracy, metrics.n_eval)

    return metrics.to_dict()


def cmd_poolsweep(cfg, out_dir):
    """Train one model per pooling head, data order and non-head init shared.

    Returns
    -------
    pandas DataFrame
        pool_head, accuracy in the fixed head order
    """
    train, test = train_test(cfg)
    names, accuracies = [], []
    for head in defines.POOL_HEADS:
        head_cfg = cfg.copy(**{defines.POOL_KEY: head})
        sub_dir = os.path.join(out_dir, "pool_{}".format(head))
        model, metrics = train_run(head_cfg, train, test, out_dir=sub_dir)
        write_run(sub_dir, head_cfg, model, metrics)
        names.append(defines.POOL_HEAD_NAMES[head])
        accuracies.append(metrics.accuracy)
    df = pd.DataFrame({"pool_head": names, "accuracy": accuracies}, columns=defines.POOLSWEEP_COLUMNS)
    cfg.save(out_dir)
    file_utils.save_table(df, os.path.join(out_dir, defines.POOLSWEEP_NAME))

    return df


def cmd_archsweep(cfg, out_dir):
    """Train every architecture from scratch, plus the warm-started one when a checkpoint is set.

    Returns
    -------
    pandas DataFrame
        model, pretrained, accuracy
    """
    train, test = train_test(cfg)
    runs = [(arch, None) for arch in defines.ARCHS]
    if cfg.pretrained_checkpoint is not None:
        source = serialization.load_model(cfg.pretrained_checkpoint)
        runs.append((source.config.arch, cfg.pretrained_checkpoint))
    rows = []
    for arch, checkpoint in runs:
        run_cfg = cfg.copy(**{defines.ARCH_KEY: arch, defines.PRETRAINED_KEY: checkpoint})
        sub_dir = os.path.join(out_dir, "arch_{}_{}".format(arch, "warm" if checkpoint else "cold"))
        model, metrics = train_run(run_cfg, train, test, warm_from=checkpoint, out_dir=sub_dir)
        write_run(sub_dir, run_cfg, model, metrics)
        rows.append((arch, "yes" if checkpoint else "no", metrics.accuracy))
    df = pd.DataFrame(rows, columns=defines.ARCHSWEEP_COLUMNS)
    cfg.save(out_dir)
    file_utils.save_table(df, os.path.join(out_dir, defines.ARCHSWEEP_NAME))

    return df


def cmd_distill(cfg, out_dir):
    """Teacher, plain student and distilled student, saved side by side.

    The teacher comes from `teacher_checkpoint` or is trained with `teacher_arch`;
    both students use `student_arch` and the same initialization.

    Returns
    -------
    dict
        test accuracy of teacher, student and student_kd
    """
    train, test = train_test(cfg)
    os.makedirs(out_dir, exist_ok=True)
    if cfg.teacher_checkpoint is not None:
        teacher = serialization.load_model(cfg.teacher_checkpoint)
        if teacher.config.task != cfg.task:
            raise LabelSetMismatch("Teacher predicts {} labels, run task is {}.".format(teacher.config.task,
                                                                                        cfg.task))
    else:
        teacher, _ = train_run(cfg, train, test, arch=cfg.teacher_arch, out_dir=out_dir)
    serialization.save_model(teacher, os.path.join(out_dir, defines.TEACHER_MODEL))

    student, student_metrics = train_run(cfg, train, test, arch=cfg.student_arch, out_dir=out_dir)
    serialization.save_model(student, os.path.join(out_dir, defines.STUDENT_MODEL))

    kd_student = build_model(model_config(cfg, arch=cfg.student_arch), seed=training.sub_seed(cfg.seed, "init"))
    _, history = distillation.distill(teacher, kd_student, train, cfg.epochs,
                                      distillation.DistillConfig(cfg.temperature, cfg.kd_lambda),
                                      batch_size=cfg.batch_size, lr=cfg.lr, seed=cfg.seed, eval_set=test,
                                      dump_path=os.path.join(out_dir, defines.NAN_DUMP_NAME))
    kd_metrics = training.evaluate(kd_student, test)
    kd_metrics.loss_curve = history.loss_curve
    kd_metrics.eval_accuracy_curve = history.eval_accuracy_curve
    write_run(out_dir, cfg, kd_student, kd_metrics, model_name=defines.KD_MODEL)

    accuracies = {"teacher": training.evaluate(teacher, test).accuracy, "student": student_metrics.accuracy,
                  "student_kd": kd_metrics.accuracy}
    logger.info("Teacher %.4f, student %.4f, distilled student %.4f", accuracies["teacher"],
                accuracies["student"], accuracies["student_kd"])

    return accuracies


def quantized_name(model_file):
    return os.path.basename(model_file).replace(".icnm", defines.QUANTIZED_SUFFIX)


def cmd_quantize(cfg, out_dir):
    """Quantize `model_path`, or the teacher and distilled student found in `out_dir`.

    Returns
    -------
    list[str]
        written model files
    """
    if cfg.model_path is not None:
        sources = [cfg.model_path]
    else:
        sources = [os.path.join(out_dir, f) for f in (defines.TEACHER_MODEL, defines.KD_MODEL)
                   if os.path.exists(os.path.join(out_dir, f))]
    if len(sources) == 0:
        raise ConfigError("Nothing to quantize: set model_path or run distill in {} first.".format(out_dir))
    os.makedirs(out_dir, exist_ok=True)

    written = []
    for src in sources:
        model = serialization.load_model(src)
        qmodel = quantization.quantize_model(model)
        dest = os.path.join(out_dir, quantized_name(src))
        serialization.save_model(qmodel, dest)
        written.append(dest)
        if os.path.exists(os.path.join(cfg.data_dir, defines.MANIFEST_NAME)):
            data, _ = load_data(cfg, model.config.labels, model.config.n_mels, model.config.clip_seconds)
            agreement = np.mean(np.argmax(training.predict(model, data), axis=1) ==
                                np.argmax(training.predict(qmodel, data), axis=1))
            logger.info("%s: float / int8 argmax agreement %.4f", os.path.basename(dest), agreement)
    cfg.save(out_dir)

    return written


def cmd_report(cfg, out_dir):
    """Compression table, run plots and the summary page of `out_dir`.

    Returns
    -------
    str
        path of index.html
    """
    entries = []
    for name, model_file in defines.COMPRESSION_VARIANTS:
        path = os.path.join(out_dir, model_file)
        if not os.path.exists(path):
            logger.warning("Compression variant %s missing (%s)", name, path)
            continue
        model = serialization.load_model(path)
        data, splits = load_data(cfg, model.config.labels, model.config.n_mels, model.config.clip_seconds)
        idx = np.flatnonzero(splits == "test")
        metrics = training.evaluate(model, data.subset(idx) if len(idx) > 0 else data)
        entries.append(report.CompressionEntry(name, metrics.accuracy, os.path.getsize(path)))
    if len(entries) > 0:
        report.compression_report(entries, os.path.join(out_dir, defines.COMPRESSION_NAME))

    metrics_file = os.path.join(out_dir, defines.METRICS_NAME)
    if os.path.exists(metrics_file):
        metrics = file_utils.load_metrics(metrics_file)
        if metrics.get(defines.LOSS_CURVE_KEY):
            plot_utils.plot_loss_curve(metrics[defines.LOSS_CURVE_KEY], out_dir,
                                       eval_curve=metrics.get(defines.EVAL_CURVE_KEY))
        plot_utils.plot_confusion_matrix(metrics[defines.CONFUSION_KEY], metrics[defines.LABELS_KEY], out_dir)
    cfg.save(out_dir)

    return run_page.generate_web_page(out_dir)


def cmd_infer(cfg, wav_path):
    """Classify one wav file with `cfg.model_path`.

    Returns
    -------
    dict
        label, labels and probabilities (label order)
    """
    model = serialization.load_model(_require_model_path(cfg))
    mcfg = model.config
    clip = audio_utils.load_wav(wav_path)
    features = signal_utils.clip_features(clip, n_mels=mcfg.n_mels,
                                          target_len=int(round(mcfg.clip_seconds * defines.SAMPLE_RATE)))
    probs = model.forward(features[None, None, :, :], train=False)[0]

    return {"label": mcfg.labels[int(np.argmax(probs))], "labels": list(mcfg.labels),
            "probabilities": [float(p) for p in probs]}


def cmd_plot(cfg, wav_paths, out_dir):
    """Waveform CSV, spectrogram PGM and a PNG figure for the given clips.

    Without paths, the first clip of every class in the dataset is shown.

    Returns
    -------
    list[str]
        written files
    """
    wav_paths = list(wav_paths or [])
    titles = [os.path.basename(p) for p in wav_paths]
    if len(wav_paths) == 0:
        df = file_utils.read_manifest(cfg.data_dir).drop_duplicates(subset=[defines.LABEL_COL])
        wav_paths = list(df[defines.PATH_COL])
        titles = list(df[defines.LABEL_COL])
    os.makedirs(out_dir, exist_ok=True)

    written, clips, features = [], [], []
    for path in wav_paths:
        clip = audio_utils.load_wav(path)
        logmel = signal_utils.clip_features(clip, n_mels=cfg.n_mels)
        stem = os.path.splitext(os.path.basename(path))[0]
        written.extend(file_utils.dump_views(clip, logmel, os.path.join(out_dir, stem)))
        clips.append(clip)
        features.append(logmel)
    written.append(plot_utils.plot_clips(clips, features, titles, out_dir))
    cfg.save(out_dir)

    return written
