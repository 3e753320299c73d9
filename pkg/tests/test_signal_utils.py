#  test_signal_utils.py - this file is part of the infantcry_tools package.
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


import numpy as np
import pytest
from numpy.testing import assert_allclose
from infantcry_tools.common.exceptions import ClipTooShort, BadFrequencyRange, ShapeMismatch, ConfigError
from infantcry_tools.utils.audio_utils import AudioClip
from infantcry_tools.utils.signal_utils import (hann_window, fft, StftConfig, frame_signal, stft_power,
                                                hz_to_mel, mel_to_hz, build_mel_filterbank, log_mel,
                                                default_frontend, clip_features)


def naive_dft(x):
    n = x.shape[-1]
    k = np.arange(n)
    return x @ np.exp(-2j * np.pi * np.outer(k, k) / n)


class TestFft:

    @pytest.mark.parametrize("n", [1, 2, 8, 64, 512, 1024])
    def test_matches_naive_dft(self, n, rng):
        x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        assert_allclose(fft(x), naive_dft(x), atol=1e-6 * max(1, n))

    def test_batched_rows(self, rng):
        x = rng.standard_normal((5, 32))
        assert_allclose(fft(x), naive_dft(x), atol=1e-9)

    def test_rejects_non_power_of_two(self):
        with pytest.raises(ShapeMismatch):
            fft(np.zeros(12))


class TestHann:

    def test_periodic(self):
        w = hann_window(8)
        assert w[0] == 0.0
        assert_allclose(w[4], 1.0)
        assert_allclose(w[1], w[7])


class TestStft:

    def test_frame_count(self):
        cfg = StftConfig()
        assert cfg.n_frames(240000) == 1497
        assert frame_signal(np.zeros(240000), cfg).shape == (1497, 512)

    def test_too_short(self):
        with pytest.raises(ClipTooShort):
            stft_power(AudioClip(np.zeros(511)), StftConfig())

    def test_bad_config(self):
        with pytest.raises(ConfigError):
            StftConfig(window_len=512, hop_len=160, fft_len=500)

    def test_zero_clip(self):
        power = stft_power(AudioClip(np.zeros(1000)), StftConfig())
        assert power.shape == (4, 257)
        assert not power.any()

    def test_dc_concentrated_in_bin_zero(self):
        power = stft_power(AudioClip(np.full(2048, 0.5)), StftConfig())
        assert np.all(power[:, 2:] < 1e-6 * power[:, :1])

    def test_sine_energy_near_its_bin(self):
        k = 40
        t = np.arange(4096)
        clip = AudioClip(0.8 * np.sin(2 * np.pi * k * t / 512))
        power = stft_power(clip, StftConfig())
        assert np.all(power[:, k - 1:k + 2].sum(axis=1) >= 0.99 * power.sum(axis=1))


class TestMel:

    def test_mel_inverse(self):
        f = np.array([0.0, 50.0, 1000.0, 8000.0])
        assert_allclose(mel_to_hz(hz_to_mel(f)), f, atol=1e-9)
        assert_allclose(hz_to_mel(700.0), 2595.0 * np.log10(2.0))

    def test_filterbank_shape_and_coverage(self):
        fb = build_mel_filterbank(64, StftConfig())
        assert fb.filters.shape == (64, 257)
        assert np.all(fb.filters.sum(axis=1) > 0)
        assert np.all(fb.filters >= 0) and np.all(fb.filters <= 1)

    def test_bad_range(self):
        with pytest.raises(BadFrequencyRange):
            build_mel_filterbank(64, StftConfig(), fmin_hz=9000.0, fmax_hz=8000.0)

    def test_too_many_mels(self):
        with pytest.raises(BadFrequencyRange):
            build_mel_filterbank(400, StftConfig())


class TestLogMel:

    def test_zero_clip_hits_floor(self):
        cfg, fb = default_frontend(64)
        spec = log_mel(AudioClip(np.zeros(4000)), cfg, fb)
        assert_allclose(spec.data, np.log(1e-10))

    def test_scaling_adds_log_four(self, rng):
        cfg, fb = default_frontend(64)
        samples = rng.uniform(-0.4, 0.4, 4000)
        a = log_mel(AudioClip(samples), cfg, fb).data
        b = log_mel(AudioClip(2.0 * samples), cfg, fb).data
        above = a > np.log(1e-10) + 1.0
        assert_allclose((b - a)[above], np.log(4.0), atol=1e-9)

    def test_clip_features_fixed_length(self):
        feats = clip_features(AudioClip(np.zeros(3000)), n_mels=32, target_len=8000)
        assert feats.dtype == np.float32
        assert feats.shape == (47, 32)
