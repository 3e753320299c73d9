#  test_audio_utils.py - this file is part of the infantcry_tools package.
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
import scipy.io.wavfile
from numpy.testing import assert_allclose, assert_array_equal
from infantcry_tools.common.exceptions import (InvalidClip, IoError, UnsupportedFormat, CorruptHeader,
                                               SampleRateMismatch)
from infantcry_tools.utils.audio_utils import (AudioClip, LabeledClip, load_wav, write_wav, pad_or_truncate,
                                               peak_normalize)


class TestAudioClip:

    def test_rejects_out_of_range_samples(self):
        with pytest.raises(InvalidClip):
            AudioClip(np.array([0.0, 1.5]))

    def test_rejects_empty(self):
        with pytest.raises(InvalidClip):
            AudioClip(np.array([]))

    def test_duration(self):
        assert AudioClip(np.zeros(8000)).duration_s == 0.5

    def test_labeled_clip_range(self):
        with pytest.raises(InvalidClip):
            LabeledClip(AudioClip(np.zeros(10)), 2, ("no-cry", "cry"))
        assert LabeledClip(AudioClip(np.zeros(10)), 1, ("no-cry", "cry")).label_name == "cry"


class TestWav:

    def test_round_trip_within_one_step(self, tmp_path, rng):
        clip = AudioClip(rng.uniform(-0.9, 0.9, 4000))
        path = str(tmp_path / "a.wav")
        write_wav(clip, path)
        loaded = load_wav(path)
        assert loaded.sample_rate_hz == 16000
        assert np.max(np.abs(loaded.samples - clip.samples)) <= 1.0 / 32768

    def test_fifteen_second_clip(self, tmp_path):
        path = str(tmp_path / "long.wav")
        scipy.io.wavfile.write(path, 16000, np.zeros(240000, dtype=np.int16))
        clip = load_wav(path)
        assert len(clip) == 240000
        assert clip.duration_s == 15.0

    def test_missing_file(self, tmp_path):
        with pytest.raises(IoError):
            load_wav(str(tmp_path / "missing.wav"))

    def test_stereo_is_unsupported(self, tmp_path):
        path = str(tmp_path / "stereo.wav")
        scipy.io.wavfile.write(path, 16000, np.zeros((100, 2), dtype=np.int16))
        with pytest.raises(UnsupportedFormat):
            load_wav(path)

    def test_float_data_is_unsupported(self, tmp_path):
        path = str(tmp_path / "float.wav")
        scipy.io.wavfile.write(path, 16000, np.zeros(100, dtype=np.float32))
        with pytest.raises(UnsupportedFormat):
            load_wav(path)

    def test_wrong_rate(self, tmp_path):
        path = str(tmp_path / "44k.wav")
        scipy.io.wavfile.write(path, 44100, np.zeros(100, dtype=np.int16))
        with pytest.raises(SampleRateMismatch):
            load_wav(path)
        assert load_wav(path, strict=False).sample_rate_hz == 44100

    def test_garbage_header(self, tmp_path):
        path = tmp_path / "bad.wav"
        path.write_bytes(b"JUNK0000garbage-garbage")
        with pytest.raises(CorruptHeader):
            load_wav(str(path))


class TestPadOrTruncate:

    def test_identity(self):
        clip = AudioClip(np.linspace(-1, 1, 10))
        assert pad_or_truncate(clip, 10) is clip

    def test_truncate_keeps_prefix(self):
        clip = AudioClip(np.linspace(-1, 1, 10))
        assert_array_equal(pad_or_truncate(clip, 4).samples, clip.samples[:4])

    def test_pad_with_zeros(self):
        clip = AudioClip(np.full(3, 0.5))
        assert_array_equal(pad_or_truncate(clip, 5).samples, [0.5, 0.5, 0.5, 0.0, 0.0])

    @pytest.mark.parametrize("target", [3, 10, 17])
    def test_idempotent(self, target, rng):
        once = pad_or_truncate(AudioClip(rng.uniform(-1, 1, 10)), target)
        assert_array_equal(pad_or_truncate(once, target).samples, once.samples)


class TestPeakNormalize:

    def test_peak_is_one(self):
        out = peak_normalize(AudioClip(np.array([0.1, -0.25, 0.2])))
        assert_allclose(np.max(np.abs(out.samples)), 1.0)
        assert_allclose(out.samples, [0.4, -1.0, 0.8])

    def test_zero_clip_unchanged(self):
        clip = AudioClip(np.zeros(5))
        assert peak_normalize(clip) is clip

    def test_idempotent(self, rng):
        once = peak_normalize(AudioClip(rng.uniform(-0.3, 0.3, 200)))
        assert_allclose(peak_normalize(once).samples, once.samples, rtol=1e-12)
