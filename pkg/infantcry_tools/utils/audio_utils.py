#  audio_utils.py - this file is part of the infantcry_tools package.
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
import warnings
from dataclasses import dataclass
import numpy as np
import scipy.io.wavfile
from ..common import defines
from ..common.exceptions import (InvalidClip, IoError, UnsupportedFormat, CorruptHeader,
                                 SampleRateMismatch)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class AudioClip(object):
    """Mono audio clip.

    Parameters
    ----------
    samples : numpy array
        samples in [-1, 1]
    sample_rate_hz : int
        sampling rate (Hz)
    """
    samples: np.ndarray
    sample_rate_hz: int = defines.SAMPLE_RATE

    def __post_init__(self):
        samples = np.array(self.samples, dtype=np.float64).reshape(-1)
        if samples.size == 0:
            raise InvalidClip("Clip has no samples.")
        if not np.all(np.isfinite(samples)):
            raise InvalidClip("Clip has non-finite samples.")
        if np.max(np.abs(samples)) > 1.0:
            raise InvalidClip("Clip samples must lie in [-1, 1].")
        if int(self.sample_rate_hz) <= 0:
            raise InvalidClip("Sample rate must be positive, got {}.".format(self.sample_rate_hz))
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))

    def __len__(self):
        return self.samples.size

    @property
    def duration_s(self):
        """Duration in seconds."""
        return self.samples.size / self.sample_rate_hz


@dataclass(frozen=True, eq=False)
class LabeledClip(object):
    """Audio clip with its class index in a fixed label set.

    Parameters
    ----------
    clip : AudioClip
        audio
    label : int
        0-based class index
    label_set : tuple[str]
        ordered class names
    """
    clip: AudioClip
    label: int
    label_set: tuple

    def __post_init__(self):
        object.__setattr__(self, "label_set", tuple(self.label_set))
        if not 0 <= int(self.label) < len(self.label_set):
            raise InvalidClip("Label {} out of range for {} classes.".format(self.label, len(self.label_set)))
        object.__setattr__(self, "label", int(self.label))

    @property
    def label_name(self):
        return self.label_set[self.label]


def load_wav(path, strict=True):
    """Load a PCM16 mono WAV file.

    Parameters
    ----------
    path : str
        path to the file
    strict : bool, optional
        reject files whose sample rate is not 16 kHz (default : True)

    Returns
    -------
    AudioClip
        clip with samples equal to the int16 values divided by 32768

    Raises
    ------
    IoError
        file not found
    CorruptHeader
        the RIFF/WAVE container cannot be parsed
    UnsupportedFormat
        data is not PCM signed 16-bit mono
    SampleRateMismatch
        header rate is not 16000 Hz and `strict` is set
    """
    if not os.path.isfile(path):
        raise IoError("File {} not found.".format(path))
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", scipy.io.wavfile.WavFileWarning)
            rate, data = scipy.io.wavfile.read(path)
    except ValueError as e:
        raise CorruptHeader("Cannot parse {}: {}".format(path, e))
    except EOFError as e:
        raise CorruptHeader("Truncated file {}: {}".format(path, e))

    if data.dtype != np.int16:
        raise UnsupportedFormat("{}: expected PCM16, found {}.".format(path, data.dtype))
    if data.ndim != 1:
        raise UnsupportedFormat("{}: expected 1 channel, found {}.".format(path, data.shape[1]))
    if data.size == 0:
        raise CorruptHeader("{}: empty data chunk.".format(path))
    if strict and rate != defines.SAMPLE_RATE:
        raise SampleRateMismatch("{}: sample rate {} Hz, expected {} Hz.".format(path, rate, defines.SAMPLE_RATE))

    return AudioClip(data.astype(np.float64) / defines.PCM_SCALE, rate)


def write_wav(clip, path):
    """Write a clip as PCM16 mono WAV.

    Parameters
    ----------
    clip : AudioClip
        clip to write
    path : str
        output file
    """
    pcm = np.clip(np.round(clip.samples * defines.PCM_SCALE), -32768, 32767).astype(np.int16)
    try:
        scipy.io.wavfile.write(path, clip.sample_rate_hz, pcm)
    except OSError as e:
        raise IoError("Cannot write {}: {}".format(path, e))
    logger.debug("Wrote %s (%d samples)", path, pcm.size)


def pad_or_truncate(clip, target_len):
    """Fix the clip length to `target_len` samples.

    Longer clips keep their prefix, shorter ones are zero-padded at the end.

    Parameters
    ----------
    clip : AudioClip
        input clip
    target_len : int
        number of samples

    Returns
    -------
    AudioClip
        clip with exactly `target_len` samples
    """
    target_len = int(target_len)
    if target_len <= 0:
        raise InvalidClip("Target length must be positive, got {}.".format(target_len))
    n = len(clip)
    if n == target_len:
        return clip
    if n > target_len:
        return AudioClip(clip.samples[:target_len], clip.sample_rate_hz)

    return AudioClip(np.concatenate((clip.samples, np.zeros(target_len - n))), clip.sample_rate_hz)


def peak_normalize(clip):
    """Scale the clip so that its maximum absolute sample is 1.

    Parameters
    ----------
    clip : AudioClip
        input clip

    Returns
    -------
    AudioClip
        normalized clip (the input itself when it is all zeros)
    """
    peak = np.max(np.abs(clip.samples))
    if peak == 0.0:
        return clip

    return AudioClip(clip.samples / peak, clip.sample_rate_hz)
