#  file_utils.py - this file is part of the infantcry_tools package.
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
import json
import logging
from collections import OrderedDict
from fractions import Fraction
import yaml
import numpy as np
import pandas as pd
from ..common import defines
from ..common.exceptions import ConfigError, IoError, EmptyDataset, LabelSetMismatch

logger = logging.getLogger(__name__)


def _choice(options):
    def check(key, value):
        if value not in options:
            raise ConfigError("{} can only be: {}".format(key, ", ".join(options)))
        return value
    return check


def _int(minimum, optional=False):
    def check(key, value):
        if value is None and optional:
            return None
        if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
            raise ConfigError("{} must be an integer >= {}, got {!r}.".format(key, minimum, value))
        return value
    return check


def _float(minimum, maximum=None, strict=True):
    def check(key, value):
        if isinstance(value, str):
            # YAML reads exponents without a dot (5e-4) as strings
            try:
                value = float(value)
            except ValueError:
                raise ConfigError("{} must be a number, got {!r}.".format(key, value))
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError("{} must be a number, got {!r}.".format(key, value))
        value = float(value)
        if not np.isfinite(value):
            raise ConfigError("{} must be finite, got {!r}.".format(key, value))
        if (strict and value <= minimum) or (not strict and value < minimum) or \
                (maximum is not None and value > maximum):
            raise ConfigError("{} is out of range: {!r}.".format(key, value))
        return value
    return check


def _width(key, value):
    if isinstance(value, bool):
        raise ConfigError("{} must be a positive rational, got {!r}.".format(key, value))
    try:
        w = Fraction(value).limit_denominator(1 << 16) if isinstance(value, float) else Fraction(str(value))
    except (ValueError, ZeroDivisionError):
        raise ConfigError("{} must be a positive rational, got {!r}.".format(key, value))
    if w <= 0:
        raise ConfigError("{} must be positive, got {}.".format(key, w))
    return str(w)


def _path(optional):
    def check(key, value):
        if value is None and optional:
            return None
        if not isinstance(value, str) or value == "":
            raise ConfigError("{} must be a path, got {!r}.".format(key, value))
        return value
    return check


# key, default, validator (config.yml keeps this order)
RUN_CONFIG_FIELDS = [
    (defines.TASK_KEY, "detect", _choice(defines.TASKS)),
    (defines.ARCH_KEY, "CNN10", _choice(defines.ARCHS)),
    (defines.WIDTH_KEY, "1/8", _width),
    (defines.POOL_KEY, "statistic", _choice(defines.POOL_HEADS)),
    (defines.HEADS_KEY, defines.DEFAULT_ATTENTION_HEADS, _int(1)),
    (defines.N_MELS_KEY, defines.N_MELS, _int(2)),
    (defines.CLIP_SECONDS_KEY, defines.DEFAULT_CLIP_SECONDS, _float(0.0)),
    (defines.EPOCHS_KEY, 10, _int(0)),
    (defines.BATCH_KEY, 32, _int(2)),
    (defines.LR_KEY, defines.ADAM_LR, _float(0.0)),
    (defines.SEED_KEY, 1, _int(0)),
    (defines.PRETRAINED_KEY, None, _path(True)),
    (defines.TEMPERATURE_KEY, defines.KD_TEMPERATURE, _float(0.0)),
    (defines.KD_LAMBDA_KEY, defines.KD_LAMBDA, _float(0.0, 1.0, strict=False)),
    (defines.TEACHER_ARCH_KEY, "CNN14", _choice(defines.ARCHS)),
    (defines.STUDENT_ARCH_KEY, "ResNet22", _choice(defines.ARCHS)),
    (defines.TEACHER_KEY, None, _path(True)),
    (defines.MODEL_PATH_KEY, None, _path(True)),
    (defines.N_PER_CLASS_KEY, 100, _int(2)),
    (defines.TRAIN_PER_CLASS_KEY, None, _int(1, optional=True)),
    (defines.DATA_DIR_KEY, "data", _path(False)),
    (defines.OUT_DIR_KEY, "runs", _path(False))
]


class RunConfig(object):
    """Run parameters, persisted as `config.yml`.

    Parameters
    ----------
    values : dict, optional
        overrides of the documented defaults (default : None)
    """

    name = defines.CONFIG_NAME

    def __init__(self, values=None):
        self.content = OrderedDict((key, default) for key, default, _ in RUN_CONFIG_FIELDS)
        if values:
            self.update(values)

    def update(self, values):
        """Validate and apply `values` (key -> value).

        Raises
        ------
        ConfigError
            on unknown keys or ill-typed values
        """
        validators = {key: check for key, _, check in RUN_CONFIG_FIELDS}
        for key, value in values.items():
            if key not in validators:
                raise ConfigError("Unknown config key {!r}.".format(key))
            self.content[key] = validators[key](key, value)
        return self

    def __getattr__(self, key):
        content = self.__dict__.get("content")
        if content is not None and key in content:
            return content[key]
        raise AttributeError(key)

    def __getitem__(self, key):
        return self.content[key]

    def to_dict(self):
        return OrderedDict(self.content)

    def copy(self, **overrides):
        return RunConfig(self.to_dict()).update(overrides)

    def dumps(self):
        return yaml.safe_dump(dict(self.content), default_flow_style=False, sort_keys=False)

    def save(self, save_path):
        """Write `config.yml` into `save_path`."""
        os.makedirs(save_path, exist_ok=True)
        path = os.path.join(save_path, self.name)
        with open(path, "w") as f:
            f.write(self.dumps())
        return path

    @classmethod
    def load(cls, path):
        """Read a config file (a directory means its `config.yml`)."""
        if os.path.isdir(path):
            path = os.path.join(path, cls.name)
        if not os.path.isfile(path):
            raise IoError("Config file {} not found.".format(path))
        with open(path, "r") as f:
            try:
                content = yaml.safe_load(f)
            except yaml.YAMLError as e:
                raise ConfigError("Config file {} is not valid YAML: {}".format(path, e))
        if content is None:
            content = {}
        if not isinstance(content, dict):
            raise ConfigError("Config file {} must hold a mapping.".format(path))
        return cls(content)


def parse_set_args(items):
    """Turn `--set key=value` items into a dict, values parsed as YAML scalars."""
    values = OrderedDict()
    for item in items or []:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigError("Expected key=value, got {!r}.".format(item))
        try:
            values[key.strip()] = yaml.safe_load(raw)
        except yaml.YAMLError:
            raise ConfigError("Cannot parse value of {!r}.".format(item))
    return values


# dataset tables

def save_table(df, path):
    df.to_csv(path, index=False)
    logger.debug("Wrote %d rows to %s", len(df), path)


def write_manifest(out_dir, paths, labels, splits):
    """Write `manifest.csv` (path,label) and `split.csv` (path,split)."""
    save_table(pd.DataFrame({defines.PATH_COL: paths, defines.LABEL_COL: labels},
                            columns=[defines.PATH_COL, defines.LABEL_COL]),
               os.path.join(out_dir, defines.MANIFEST_NAME))
    save_table(pd.DataFrame({defines.PATH_COL: paths, defines.SPLIT_COL: splits},
                            columns=[defines.PATH_COL, defines.SPLIT_COL]),
               os.path.join(out_dir, defines.SPLIT_NAME))


def _read_csv(path, columns):
    if not os.path.isfile(path):
        raise IoError("File {} not found.".format(path))
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise IoError("Cannot read {}: {}".format(path, e))
    if list(df.columns) != columns:
        raise IoError("{} must have header {}, got {}.".format(path, ",".join(columns), ",".join(df.columns)))
    return df


def read_manifest(manifest_path, split=None):
    """Manifest rows joined with their split.

    Parameters
    ----------
    manifest_path : str
        `manifest.csv`, or the dataset directory holding it
    split : str, optional
        keep only `train` or `test` rows (default : None, all rows)

    Returns
    -------
    pandas DataFrame
        columns path (absolute), label, split
    """
    if os.path.isdir(manifest_path):
        manifest_path = os.path.join(manifest_path, defines.MANIFEST_NAME)
    root = os.path.dirname(os.path.abspath(manifest_path))
    df = _read_csv(manifest_path, [defines.PATH_COL, defines.LABEL_COL])
    split_path = os.path.join(root, defines.SPLIT_NAME)
    if os.path.isfile(split_path):
        splits = _read_csv(split_path, [defines.PATH_COL, defines.SPLIT_COL])
        df = df.merge(splits, on=defines.PATH_COL, how="left")
        df[defines.SPLIT_COL] = df[defines.SPLIT_COL].fillna("")
    else:
        df[defines.SPLIT_COL] = ""
    df[defines.PATH_COL] = [p if os.path.isabs(p) else os.path.join(root, p) for p in df[defines.PATH_COL]]
    if split is not None:
        df = df[df[defines.SPLIT_COL] == split].reset_index(drop=True)
    if len(df) == 0:
        raise EmptyDataset("No {}clips listed in {}.".format("" if split is None else split + " ", manifest_path))
    return df


def label_indices(label_names, label_set):
    """Class indices of label names; names outside `label_set` raise LabelSetMismatch."""
    lookup = {name: i for i, name in enumerate(label_set)}
    unknown = sorted(set(label_names) - set(lookup))
    if unknown:
        raise LabelSetMismatch("Labels {} are not in the label set {}.".format(", ".join(unknown),
                                                                               ", ".join(label_set)))
    return np.array([lookup[name] for name in label_names], dtype=np.int64)


def save_features(dataset, path, n_mels, clip_seconds):
    """Cache featurized clips in a .npz archive, with the front-end settings."""
    np.savez(path, features=dataset.features, labels=dataset.labels, paths=np.array(dataset.paths, dtype=str),
             label_set=np.array(dataset.label_set, dtype=str), n_mels=np.array(n_mels),
             clip_seconds=np.array(clip_seconds))
    logger.info("Cached %d feature matrices in %s", len(dataset), path)


def load_features(path):
    """Read a cache written by `save_features`.

    Returns
    -------
    dict
        features, labels, paths, label_set, n_mels, clip_seconds
    """
    try:
        with np.load(path, allow_pickle=False) as z:
            return {"features": z["features"], "labels": z["labels"], "paths": [str(p) for p in z["paths"]],
                    "label_set": [str(s) for s in z["label_set"]], "n_mels": int(z["n_mels"]),
                    "clip_seconds": float(z["clip_seconds"])}
    except (OSError, KeyError, ValueError) as e:
        raise IoError("Cannot read feature cache {}: {}".format(path, e))


# run outputs

def metrics_to_json(metrics):
    return json.dumps(metrics, sort_keys=True, indent=2) + "\n"


def save_metrics(metrics, save_path, name=defines.METRICS_NAME):
    """Write a metrics dict as canonical JSON (sorted keys)."""
    path = os.path.join(save_path, name)
    with open(path, "w") as f:
        f.write(metrics_to_json(metrics))
    logger.debug("Wrote metrics to %s", path)
    return path


def load_metrics(path):
    if os.path.isdir(path):
        path = os.path.join(path, defines.METRICS_NAME)
    with open(path, "r") as f:
        return json.load(f)


def waveform_csv(clip, path):
    """Write the clip as CSV `t_seconds,amplitude`."""
    t = np.arange(len(clip)) / clip.sample_rate_hz
    save_table(pd.DataFrame({"t_seconds": t, "amplitude": clip.samples}, columns=["t_seconds", "amplitude"]),
               path)


def spectrogram_pgm(logmel, path):
    """Write a log-mel matrix (frames, mels) as a binary 8-bit PGM image.

    Time runs left to right, the lowest mel band is the bottom row; values are
    min-max scaled to 0..255.
    """
    data = np.asarray(logmel, dtype=np.float64)
    lo, hi = data.min(), data.max()
    scaled = np.zeros_like(data) if hi == lo else (data - lo) / (hi - lo)
    img = np.round(scaled.T[::-1] * 255.0).astype(np.uint8)
    height, width = img.shape
    with open(path, "wb") as f:
        f.write("P5\n{:d} {:d}\n255\n".format(width, height).encode("ascii"))
        f.write(img.tobytes())


def dump_views(clip, logmel, out_prefix):
    """Write the waveform and spectrogram views of one clip.

    Parameters
    ----------
    clip : AudioClip
        input clip
    logmel : numpy ndarray
        log-mel matrix (frames, mels) of the clip
    out_prefix : str
        output path without extension

    Returns
    -------
    tuple[str]
        `<prefix>.wave.csv` and `<prefix>.spec.pgm`
    """
    csv_path, pgm_path = out_prefix + ".wave.csv", out_prefix + ".spec.pgm"
    try:
        waveform_csv(clip, csv_path)
        spectrogram_pgm(logmel, pgm_path)
    except OSError as e:
        raise IoError("Cannot write the views of {}: {}".format(out_prefix, e))

    return csv_path, pgm_path


def get_run_folders(res_path, must_include=None):
    """Sub-folders of `res_path` holding every file in `must_include`."""
    must_include = must_include or []
    folders = []
    for name in sorted(os.listdir(res_path)):
        path = os.path.join(res_path, name)
        if os.path.isdir(path) and all(os.path.exists(os.path.join(path, f)) for f in must_include):
            folders.append(name)
    return folders


def clip_plot_name(ext="png"):
    return "clips.{}".format(ext)


def loss_plot_name(ext="png"):
    return "loss_curve.{}".format(ext)


def confusion_plot_name(ext="png"):
    return "confusion_matrix.{}".format(ext)
