#  test_file_utils.py - this file is part of the infantcry_tools package.
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
import numpy as np
import pandas as pd
import pytest
import yaml
from numpy.testing import assert_array_equal
from infantcry_tools.algorithms.training import Dataset
from infantcry_tools.common import defines
from infantcry_tools.common.exceptions import ConfigError, IoError, EmptyDataset, LabelSetMismatch
from infantcry_tools.synth.synthdata import SynthSpec, gen_clip
from infantcry_tools.utils import file_utils, signal_utils
from infantcry_tools.utils.audio_utils import AudioClip


class TestRunConfig:

    def test_defaults(self):
        cfg = file_utils.RunConfig()
        assert cfg.task == "detect"
        assert cfg.width_mult == "1/8"
        assert cfg.pretrained_checkpoint is None
        assert cfg.batch_size == 32

    def test_canonical_order(self, tmp_path):
        path = file_utils.RunConfig({"seed": 4}).save(str(tmp_path))
        with open(path) as f:
            keys = [line.split(":")[0] for line in f if not line.startswith(" ")]
        assert keys == [key for key, _, _ in file_utils.RUN_CONFIG_FIELDS]

    def test_save_load_round_trip(self, tmp_path):
        cfg = file_utils.RunConfig({"task": "classify", "width_mult": 0.25, "train_per_class": 20})
        cfg.save(str(tmp_path))
        loaded = file_utils.RunConfig.load(str(tmp_path))
        assert loaded.to_dict() == cfg.to_dict()
        assert loaded.width_mult == "1/4"
        assert loaded.dumps() == cfg.dumps()

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            file_utils.RunConfig({"learning_rate": 0.1})

    @pytest.mark.parametrize("key,value", [("epochs", "ten"), ("batch_size", 1), ("kd_lambda", 1.5),
                                           ("pool_head", "median"), ("width_mult", "0"), ("lr", True),
                                           ("lr", "nan")])
    def test_bad_values(self, key, value):
        with pytest.raises(ConfigError):
            file_utils.RunConfig({key: value})

    def test_copy_overrides(self):
        cfg = file_utils.RunConfig()
        other = cfg.copy(pool_head="max")
        assert other.pool_head == "max" and cfg.pool_head == "statistic"

    def test_load_errors(self, tmp_path):
        with pytest.raises(IoError):
            file_utils.RunConfig.load(str(tmp_path / "missing.yml"))
        bad = tmp_path / "bad.yml"
        bad.write_text("- a\n- b\n")
        with pytest.raises(ConfigError):
            file_utils.RunConfig.load(str(bad))

    def test_set_args(self):
        values = file_utils.parse_set_args(["epochs=3", "width_mult=1/16", "pretrained_checkpoint=null",
                                            "lr=5e-4"])
        assert values["epochs"] == 3 and values["pretrained_checkpoint"] is None
        cfg = file_utils.RunConfig(values)
        assert cfg.width_mult == "1/16"
        assert cfg.lr == 5e-4
        with pytest.raises(ConfigError):
            file_utils.parse_set_args(["epochs"])


class TestManifest:

    def _write(self, root, rows, splits=None):
        pd.DataFrame(rows, columns=["path", "label"]).to_csv(os.path.join(root, "manifest.csv"), index=False)
        if splits is not None:
            pd.DataFrame(splits, columns=["path", "split"]).to_csv(os.path.join(root, "split.csv"), index=False)

    def test_join_and_absolute_paths(self, tmp_path):
        self._write(str(tmp_path), [("wav/a.wav", "cry"), ("wav/b.wav", "no-cry")],
                    [("wav/a.wav", "train"), ("wav/b.wav", "test")])
        df = file_utils.read_manifest(str(tmp_path))
        assert df["path"].tolist() == [str(tmp_path / "wav" / "a.wav"), str(tmp_path / "wav" / "b.wav")]
        assert file_utils.read_manifest(str(tmp_path), split="test")["label"].tolist() == ["no-cry"]

    def test_without_split_file(self, tmp_path):
        self._write(str(tmp_path), [("a.wav", "cry")])
        assert file_utils.read_manifest(str(tmp_path))["split"].tolist() == [""]
        with pytest.raises(EmptyDataset):
            file_utils.read_manifest(str(tmp_path), split="train")

    def test_bad_header(self, tmp_path):
        (tmp_path / "manifest.csv").write_text("file,class\na.wav,cry\n")
        with pytest.raises(IoError):
            file_utils.read_manifest(str(tmp_path))

    def test_missing(self, tmp_path):
        with pytest.raises(IoError):
            file_utils.read_manifest(str(tmp_path))

    def test_label_indices(self):
        assert_array_equal(file_utils.label_indices(["cry", "no-cry"], ["no-cry", "cry"]), [1, 0])
        with pytest.raises(LabelSetMismatch):
            file_utils.label_indices(["hungry"], ["no-cry", "cry"])


class TestOutputs:

    def test_features_cache(self, tmp_path, rng):
        data = Dataset(rng.standard_normal((3, 1, 5, 4)).astype(np.float32), [0, 1, 1], ["a", "b", "c"],
                       ["no-cry", "cry"])
        path = str(tmp_path / "features.npz")
        file_utils.save_features(data, path, 4, 0.5)
        cached = file_utils.load_features(path)
        assert_array_equal(cached["features"], data.features)
        assert cached["paths"] == ["a", "b", "c"]
        assert cached["n_mels"] == 4 and cached["clip_seconds"] == 0.5

    def test_metrics_json_is_canonical(self, tmp_path):
        path = file_utils.save_metrics({"b": 1, "a": [0.5, None]}, str(tmp_path))
        with open(path) as f:
            text = f.read()
        assert text == file_utils.metrics_to_json({"a": [0.5, None], "b": 1})
        assert text.endswith("\n")
        assert file_utils.load_metrics(str(tmp_path)) == {"a": [0.5, None], "b": 1}

    def test_waveform_csv(self, tmp_path):
        path = str(tmp_path / "w.csv")
        file_utils.waveform_csv(AudioClip(np.array([0.0, 0.5]), 16000), path)
        df = pd.read_csv(path)
        assert list(df.columns) == ["t_seconds", "amplitude"]
        assert df["t_seconds"].tolist() == [0.0, 1.0 / 16000]

    def test_pgm_zero(self, tmp_path):
        path = tmp_path / "z.pgm"
        file_utils.spectrogram_pgm(np.zeros((5, 3)), str(path))
        data = path.read_bytes()
        assert data.startswith(b"P5\n5 3\n255\n")
        assert data[len(b"P5\n5 3\n255\n"):] == bytes(15)

    def test_pgm_low_band_at_bottom(self, tmp_path):
        logmel = np.zeros((2, 3))
        logmel[:, 0] = 1.0
        path = tmp_path / "low.pgm"
        file_utils.spectrogram_pgm(logmel, str(path))
        pixels = np.frombuffer(path.read_bytes()[-6:], dtype=np.uint8).reshape(3, 2)
        assert_array_equal(pixels[-1], [255, 255])
        assert not pixels[:-1].any()

    def test_view_names(self, tmp_path):
        clip = AudioClip(np.zeros(1600))
        written = file_utils.dump_views(clip, np.zeros((1, 4)), str(tmp_path / "quiet"))
        assert [os.path.basename(p) for p in written] == ["quiet.wave.csv", "quiet.spec.pgm"]
        assert (tmp_path / "quiet.spec.pgm").read_bytes().startswith(b"P5\n1 4\n255\n")

    def test_view_unwritable(self, tmp_path):
        with pytest.raises(IoError):
            file_utils.dump_views(AudioClip(np.zeros(10)), np.zeros((1, 2)), str(tmp_path / "missing" / "x"))

    def test_cry_columns_repeat_at_burst_period(self, tmp_path):
        rate = 2.0
        clip = gen_clip(SynthSpec(burst_rate_hz=rate, duration_s=4.0, seed=5)).clip
        _, pgm_path = file_utils.dump_views(clip, signal_utils.clip_features(clip, n_mels=32),
                                            str(tmp_path / "cry"))
        with open(pgm_path, "rb") as f:
            data = f.read()
        header = b"P5\n397 32\n255\n"
        assert data.startswith(header)
        pixels = np.frombuffer(data[len(header):], dtype=np.uint8).reshape(32, 397)
        energy = pixels.sum(axis=0).astype(np.float64)
        energy -= energy.mean()
        ac = np.correlate(energy, energy, mode="full")[energy.size - 1:]
        period = defines.SAMPLE_RATE / defines.HOP_LEN / rate
        lo, hi = int(0.5 * period), int(1.5 * period)
        lag = lo + int(np.argmax(ac[lo:hi]))
        assert abs(lag - period) <= 0.1 * period

    def test_run_folders(self, tmp_path):
        (tmp_path / "b").mkdir()
        (tmp_path / "a").mkdir()
        (tmp_path / "a" / "metrics.json").write_text("{}")
        (tmp_path / "file.txt").write_text("")
        assert file_utils.get_run_folders(str(tmp_path)) == ["a", "b"]
        assert file_utils.get_run_folders(str(tmp_path), must_include=["metrics.json"]) == ["a"]

    def test_yaml_is_plain(self, tmp_path):
        path = file_utils.RunConfig().save(str(tmp_path))
        with open(path) as f:
            assert yaml.safe_load(f)["out_dir"] == "runs"
