#  synthdata.py - this file is part of the infantcry_tools package.
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
from dataclasses import dataclass, replace
import numpy as np
import pandas as pd
from ..common import defines
from ..common.exceptions import BadSpec, IoError
from ..utils import audio_utils, file_utils

logger = logging.getLogger(__name__)

KINDS = ["cry", "voice", "noise", "event"]
CONTOURS = ["flat", "rising", "falling", "arch", "vibrato"]

# (f0 range Hz, burst rate Hz, harmonics, tilt dB per harmonic, contour), one row per reason
REASON_TABLE = {
    "awake": ((350.0, 400.0), 0.8, 6, -3.0, "flat"),
    "hug": ((380.0, 430.0), 1.0, 5, -6.0, "rising"),
    "sleepy": ((370.0, 400.0), 0.8, 4, -9.0, "falling"),
    "uncomfortable": ((430.0, 480.0), 1.5, 8, -2.0, "vibrato"),
    "diaper": ((400.0, 450.0), 1.2, 7, -4.0, "arch"),
    "hungry": ((450.0, 500.0), 1.5, 6, -6.0, "flat")
}

# pretraining events: harmonic bursts above the cry band and faster than cry bursts
EVENT_TABLE = [((600.0 + 35.0 * k, 625.0 + 35.0 * k), 2.0 + 0.3 * k, 2 + k % 4, -3.0 - k % 3, CONTOURS[k % 5])
               for k in range(len(defines.PRETRAIN_LABELS))]

VOICE_F0 = (120.0, 200.0)
CONTOUR_DEPTH = 0.05
VIBRATO_RATE_HZ = 6.0
VIBRATO_DEPTH = 0.03
CRY_PEAK = (0.75, 0.95)
VOICE_PEAK = (0.2, 0.4)
NOISE_PEAK = (0.2, 0.5)
PINK_ROWS = 16


@dataclass(frozen=True)
class SynthSpec(object):
    """Generator parameters of one clip.

    Parameters
    ----------
    task : str
        detect, classify or pretrain
    class_id : int
        label index in the task label set
    kind : str
        cry, voice, noise or event
    f0_range : tuple[float]
        fundamental frequency range (Hz), inside (80, 1000)
    burst_rate_hz : float
        amplitude modulation rate of cry and event bursts
    harmonic_count : int
        number of harmonics
    tilt_db : float
        level change per harmonic (dB)
    contour : str
        F0 contour shape
    noise_floor : float
        pink noise level added under the signal
    duration_s : float
        clip length (s)
    seed : int
        random seed
    """
    task: str = "detect"
    class_id: int = 1
    kind: str = "cry"
    f0_range: tuple = REASON_TABLE["awake"][0]
    burst_rate_hz: float = REASON_TABLE["awake"][1]
    harmonic_count: int = REASON_TABLE["awake"][2]
    tilt_db: float = REASON_TABLE["awake"][3]
    contour: str = REASON_TABLE["awake"][4]
    noise_floor: float = 0.01
    duration_s: float = defines.DEFAULT_CLIP_SECONDS
    seed: int = 0

    def __post_init__(self):
        if self.task not in defines.TASKS:
            raise BadSpec("Task can only be: {}".format(", ".join(defines.TASKS)))
        if not 0 <= self.class_id < len(defines.LABEL_SETS[self.task]):
            raise BadSpec("Class {} is outside the {} label set.".format(self.class_id, self.task))
        if self.kind not in KINDS:
            raise BadSpec("Kind can only be: {}".format(", ".join(KINDS)))
        if self.contour not in CONTOURS:
            raise BadSpec("Contour can only be: {}".format(", ".join(CONTOURS)))
        lo, hi = self.f0_range
        if not 80.0 < lo <= hi < 1000.0:
            raise BadSpec("F0 range {} must lie inside (80, 1000) Hz.".format(self.f0_range))
        if not self.duration_s > 0:
            raise BadSpec("Duration must be positive, got {}.".format(self.duration_s))
        if self.harmonic_count < 1:
            raise BadSpec("Need at least one harmonic, got {}.".format(self.harmonic_count))
        if self.kind in ("cry", "event") and not self.burst_rate_hz > 0:
            raise BadSpec("Burst rate must be positive, got {}.".format(self.burst_rate_hz))
        if self.noise_floor < 0:
            raise BadSpec("Noise floor must be non-negative, got {}.".format(self.noise_floor))


def pink_noise(n, rng, n_rows=PINK_ROWS):
    """Voss-McCartney pink noise, unit peak.

    Row k holds a Gaussian value refreshed every 2^k samples (random phase);
    the sum of the rows has a 1/f power spectrum.
    """
    total = np.zeros(n)
    for k in range(n_rows):
        step = 1 << k
        offset = int(rng.integers(step))
        values = rng.standard_normal((n + offset) // step + 1)
        total += values[(np.arange(n) + offset) // step]
    peak = np.max(np.abs(total))

    return total / peak if peak > 0 else total


def _contour(name, t, duration):
    u = t / duration
    if name == "rising":
        return 1.0 + CONTOUR_DEPTH * (2.0 * u - 1.0)
    if name == "falling":
        return 1.0 - CONTOUR_DEPTH * (2.0 * u - 1.0)
    if name == "arch":
        return 1.0 + CONTOUR_DEPTH * np.sin(np.pi * u)
    if name == "vibrato":
        return 1.0 + VIBRATO_DEPTH * np.sin(2.0 * np.pi * VIBRATO_RATE_HZ * t)
    return np.ones_like(t)


def _harmonic_stack(f0_track, harmonics, tilt_db, rng):
    phase = 2.0 * np.pi * np.cumsum(f0_track) / defines.SAMPLE_RATE
    out = np.zeros_like(f0_track)
    nyquist = defines.SAMPLE_RATE / 2.0
    for k in range(1, harmonics + 1):
        if k * np.max(f0_track) >= nyquist:
            break
        out += 10.0 ** (tilt_db * (k - 1) / 20.0) * np.sin(k * phase + rng.uniform(0.0, 2.0 * np.pi))
    return out


def _normalize(x, peak):
    m = np.max(np.abs(x))
    return x * (peak / m) if m > 0 else x


def _burst_signal(spec, t, rng):
    f0 = rng.uniform(*spec.f0_range)
    stack = _harmonic_stack(f0 * _contour(spec.contour, t, spec.duration_s), spec.harmonic_count, spec.tilt_db, rng)
    # periodic bursts, period 1 / burst_rate
    envelope = (0.5 - 0.5 * np.cos(2.0 * np.pi * spec.burst_rate_hz * t + rng.uniform(0.0, 2.0 * np.pi))) ** 2
    return envelope * stack


def _voice_signal(spec, t, rng):
    n = t.size
    seg = int(0.1 * defines.SAMPLE_RATE)
    gates = rng.uniform(0.05, 1.0, size=n // seg + 2)
    smooth = np.hanning(int(0.05 * defines.SAMPLE_RATE))
    envelope = np.convolve(np.repeat(gates, seg)[:n], smooth / smooth.sum(), mode="same")
    jitter = np.convolve(rng.standard_normal(n), np.ones(800) / 800.0, mode="same")
    f0 = rng.uniform(*spec.f0_range) * (1.0 + 0.3 * jitter)
    return envelope * _harmonic_stack(f0, spec.harmonic_count, spec.tilt_db, rng)


def gen_clip(spec):
    """Generate one labeled clip.

    Parameters
    ----------
    spec : SynthSpec
        generator parameters

    Returns
    -------
    LabeledClip
        clip and label; identical for identical specs
    """
    rng = np.random.default_rng(spec.seed)
    n = int(round(spec.duration_s * defines.SAMPLE_RATE))
    if n < 1:
        raise BadSpec("Duration {} s gives no samples.".format(spec.duration_s))
    t = np.arange(n) / defines.SAMPLE_RATE

    if spec.kind == "noise":
        x = _normalize(pink_noise(n, rng), rng.uniform(*NOISE_PEAK))
    else:
        if spec.kind == "voice":
            signal, peak = _voice_signal(spec, t, rng), rng.uniform(*VOICE_PEAK)
        else:
            signal, peak = _burst_signal(spec, t, rng), rng.uniform(*CRY_PEAK)
        x = _normalize(_normalize(signal, 1.0) + spec.noise_floor * pink_noise(n, rng), peak)

    label_set = tuple(defines.LABEL_SETS[spec.task])
    return audio_utils.LabeledClip(audio_utils.AudioClip(x), spec.class_id, label_set)


def _reason_spec(reason, **kwargs):
    f0, rate, harmonics, tilt, contour = REASON_TABLE[reason]
    return SynthSpec(kind="cry", f0_range=f0, burst_rate_hz=rate, harmonic_count=harmonics, tilt_db=tilt,
                     contour=contour, **kwargs)


def clip_spec(task, class_id, clip_index, seed, duration_s=defines.DEFAULT_CLIP_SECONDS):
    """Spec of the `clip_index`-th clip of a dataset (clip seed = seed ^ clip_index).

    Detection negatives alternate adult voice and pink noise, detection
    positives cycle through the six reason tuples.
    """
    common = dict(task=task, class_id=class_id, duration_s=duration_s, seed=int(seed) ^ int(clip_index))
    if task == "classify":
        return _reason_spec(defines.REASON_LABELS[class_id], **common)
    if task == "pretrain":
        f0, rate, harmonics, tilt, contour = EVENT_TABLE[class_id]
        return SynthSpec(kind="event", f0_range=f0, burst_rate_hz=rate, harmonic_count=harmonics, tilt_db=tilt,
                         contour=contour, **common)
    if class_id == 1:
        return _reason_spec(defines.REASON_LABELS[clip_index % len(defines.REASON_LABELS)], **common)
    if clip_index % 2 == 0:
        return SynthSpec(kind="voice", f0_range=VOICE_F0, harmonic_count=6, tilt_db=-6.0, contour="flat",
                         **common)
    return replace(SynthSpec(**common), kind="noise")


def n_test_clips(n_per_class):
    """Test clips per class for a 10:1 train / test split."""
    return max(1, int(round(n_per_class / (defines.TRAIN_TEST_RATIO + 1))))


def gen_dataset(task, n_per_class, seed, out_dir, duration_s=defines.DEFAULT_CLIP_SECONDS):
    """Write a balanced synthetic dataset.

    Files are `wav/<label>_<nnnn>.wav` plus `manifest.csv` (path,label),
    `split.csv` (path,split) and `overview.csv` (task,training,testing).
    The last clips of each class form the test split.

    Parameters
    ----------
    task : str
        detect, classify or pretrain
    n_per_class : int
        clips per class (>= 2)
    seed : int
        dataset seed
    out_dir : str
        output folder

    Returns
    -------
    pandas DataFrame
        manifest rows with their split
    """
    if task not in defines.TASKS:
        raise BadSpec("Task can only be: {}".format(", ".join(defines.TASKS)))
    if n_per_class < 2:
        raise BadSpec("Need at least 2 clips per class, got {}.".format(n_per_class))
    wav_dir = os.path.join(out_dir, defines.WAV_FOLDER)
    try:
        os.makedirs(wav_dir, exist_ok=True)
    except OSError as e:
        raise IoError("Cannot create {}: {}".format(wav_dir, e))

    labels = defines.LABEL_SETS[task]
    n_test = n_test_clips(n_per_class)
    paths, names, splits = [], [], []
    clip_index = 0
    for class_id, name in enumerate(labels):
        for i in range(n_per_class):
            clip = gen_clip(clip_spec(task, class_id, clip_index, seed, duration_s))
            rel_path = "{}/{}_{:04d}.wav".format(defines.WAV_FOLDER, name, i)
            audio_utils.write_wav(clip.clip, os.path.join(out_dir, rel_path))
            paths.append(rel_path)
            names.append(name)
            splits.append("test" if i >= n_per_class - n_test else "train")
            clip_index += 1

    file_utils.write_manifest(out_dir, paths, names, splits)
    n_train = splits.count("train")
    file_utils.save_table(pd.DataFrame({"task": [task], "training": [n_train], "testing": [len(splits) - n_train]},
                                       columns=defines.OVERVIEW_COLUMNS),
                          os.path.join(out_dir, defines.OVERVIEW_NAME))
    logger.info("Generated %d %s clips (%d train, %d test) in %s", len(paths), task, n_train,
                len(splits) - n_train, out_dir)

    return pd.DataFrame({defines.PATH_COL: paths, defines.LABEL_COL: names, defines.SPLIT_COL: splits})
