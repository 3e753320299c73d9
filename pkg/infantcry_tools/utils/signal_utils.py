#  signal_utils.py - this file is part of the infantcry_tools package.
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
from functools import lru_cache
import numpy as np
from ..common import defines
from ..common.exceptions import ConfigError, ClipTooShort, BadFrequencyRange, ShapeMismatch
from .audio_utils import pad_or_truncate

logger = logging.getLogger(__name__)


def hann_window(n):
    """Periodic Hann window.

    Parameters
    ----------
    n : int
        window length

    Returns
    -------
    numpy array
        coefficients 0.5 - 0.5 * cos(2 * pi * i / n)
    """
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def _bit_reversed_indices(n):
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)

    return rev


def is_power_of_two(n):
    return n >= 1 and (n & (n - 1)) == 0


def fft(x):
    """Iterative radix-2 decimation-in-time FFT along the last axis.

    Parameters
    ----------
    x : numpy ndarray
        real or complex input, last axis length a power of two

    Returns
    -------
    numpy ndarray
        complex spectrum, same shape as `x`
    """
    a = np.asarray(x, dtype=np.complex128)
    n = a.shape[-1]
    if not is_power_of_two(n):
        raise ShapeMismatch("FFT length must be a power of two, got {}.".format(n))
    lead = a.shape[:-1]
    a = a[..., _bit_reversed_indices(n)]

    size = 2
    while size <= n:
        half = size // 2
        twiddle = np.exp(-2j * np.pi * np.arange(half) / size)
        blocks = a.reshape(lead + (n // size, size))
        even = blocks[..., :half]
        odd = blocks[..., half:] * twiddle
        a = np.concatenate((even + odd, even - odd), axis=-1).reshape(lead + (n,))
        size *= 2

    return a


@dataclass(frozen=True)
class StftConfig(object):
    """Short-time Fourier transform parameters (samples)."""
    window_len: int = defines.WINDOW_LEN
    hop_len: int = defines.HOP_LEN
    fft_len: int = defines.FFT_LEN
    window: np.ndarray = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not 0 < self.hop_len <= self.window_len <= self.fft_len:
            raise ConfigError("Need 0 < hop_len <= window_len <= fft_len, got {}, {}, {}.".format(
                self.hop_len, self.window_len, self.fft_len))
        if not is_power_of_two(self.fft_len):
            raise ConfigError("fft_len must be a power of two, got {}.".format(self.fft_len))
        window = hann_window(self.window_len)
        window.setflags(write=False)
        object.__setattr__(self, "window", window)

    @property
    def n_bins(self):
        return self.fft_len // 2 + 1

    def n_frames(self, n_samples):
        """Number of full frames in a signal of `n_samples` samples."""
        if n_samples < self.window_len:
            return 0
        return 1 + (n_samples - self.window_len) // self.hop_len


def frame_signal(samples, cfg):
    """Split a signal into overlapping frames (tail partial frame dropped).

    Returns
    -------
    numpy ndarray
        frames matrix (n_frames, window_len)
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.size < cfg.window_len:
        raise ClipTooShort("Clip has {} samples, window needs {}.".format(samples.size, cfg.window_len))
    windows = np.lib.stride_tricks.sliding_window_view(samples, cfg.window_len)

    return windows[::cfg.hop_len]


def stft_power(clip, cfg):
    """Power spectrogram |DFT(hann * frame)|^2.

    Parameters
    ----------
    clip : AudioClip
        input clip
    cfg : StftConfig
        frame parameters

    Returns
    -------
    numpy ndarray
        power matrix (n_frames, fft_len // 2 + 1)
    """
    frames = frame_signal(clip.samples, cfg) * cfg.window
    if cfg.fft_len > cfg.window_len:
        frames = np.pad(frames, ((0, 0), (0, cfg.fft_len - cfg.window_len)))
    spectrum = fft(frames)[:, :cfg.n_bins]

    return spectrum.real ** 2 + spectrum.imag ** 2


def hz_to_mel(f):
    """mel(f) = 2595 * log10(1 + f / 700)."""
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@dataclass(frozen=True, eq=False)
class MelFilterbank(object):
    """Triangular mel filters, one row per mel band."""
    n_mels: int
    filters: np.ndarray
    fmin_hz: float
    fmax_hz: float


def build_mel_filterbank(n_mels, cfg, fmin_hz=defines.FMIN_HZ, fmax_hz=defines.FMAX_HZ,
                         sample_rate=defines.SAMPLE_RATE):
    """Triangular filterbank with peaks equally spaced on the mel scale.

    Parameters
    ----------
    n_mels : int
        number of filters
    cfg : StftConfig
        frame parameters (gives the FFT bin frequencies)
    fmin_hz : float, optional
        lower edge of the first filter (default : 50)
    fmax_hz : float, optional
        upper edge of the last filter (default : 8000)
    sample_rate : int, optional
        sampling rate (default : 16000)

    Returns
    -------
    MelFilterbank
        filters matrix (n_mels, fft_len // 2 + 1)
    """
    if n_mels < 2:
        raise ConfigError("n_mels must be at least 2, got {}.".format(n_mels))
    if not 0.0 <= fmin_hz < fmax_hz <= sample_rate / 2.0:
        raise BadFrequencyRange("Need 0 <= fmin < fmax <= {}, got {} and {}.".format(
            sample_rate / 2.0, fmin_hz, fmax_hz))

    edges = mel_to_hz(np.linspace(hz_to_mel(fmin_hz), hz_to_mel(fmax_hz), n_mels + 2))
    bin_freqs = np.arange(cfg.n_bins) * sample_rate / cfg.fft_len
    lower = (bin_freqs[np.newaxis, :] - edges[:-2, np.newaxis]) / (edges[1:-1] - edges[:-2])[:, np.newaxis]
    upper = (edges[2:, np.newaxis] - bin_freqs[np.newaxis, :]) / (edges[2:] - edges[1:-1])[:, np.newaxis]
    filters = np.maximum(0.0, np.minimum(lower, upper))

    empty = np.where(filters.sum(axis=1) <= 0.0)[0]
    if empty.size > 0:
        raise BadFrequencyRange("Mel filters {} cover no FFT bin; use fewer mels or a longer FFT.".format(
            empty.tolist()))
    filters.setflags(write=False)

    return MelFilterbank(n_mels, filters, float(fmin_hz), float(fmax_hz))


@dataclass(frozen=True, eq=False)
class LogMelSpectrogram(object):
    """Natural-log mel energies, (n_frames, n_mels)."""
    data: np.ndarray

    @property
    def n_frames(self):
        return self.data.shape[0]

    @property
    def n_mels(self):
        return self.data.shape[1]


def log_mel(clip, cfg, fb, floor_eps=defines.LOG_FLOOR):
    """Log-Mel spectrogram of a clip.

    Parameters
    ----------
    clip : AudioClip
        input clip
    cfg : StftConfig
        frame parameters
    fb : MelFilterbank
        filterbank built for `cfg`
    floor_eps : float, optional
        energy floor before the logarithm (default : 1e-10)

    Returns
    -------
    LogMelSpectrogram
        ln(max(filters . power, floor_eps)) per frame and band
    """
    power = stft_power(clip, cfg)
    mel = power @ fb.filters.T

    return LogMelSpectrogram(np.log(np.maximum(mel, floor_eps)))


@lru_cache(maxsize=8)
def default_frontend(n_mels=defines.N_MELS):
    """Shared STFT config and filterbank for the pipeline defaults."""
    cfg = StftConfig()
    return cfg, build_mel_filterbank(n_mels, cfg)


def clip_features(clip, n_mels=defines.N_MELS, target_len=None):
    """Model input features for one clip.

    Parameters
    ----------
    clip : AudioClip
        input clip
    n_mels : int, optional
        mel bands (default : 64)
    target_len : int, optional
        fix the clip length before the transform (default : None)

    Returns
    -------
    numpy ndarray
        float32 log-mel matrix (n_frames, n_mels)
    """
    if target_len is not None:
        clip = pad_or_truncate(clip, target_len)
    cfg, fb = default_frontend(n_mels)

    return log_mel(clip, cfg, fb).data.astype(np.float32)
