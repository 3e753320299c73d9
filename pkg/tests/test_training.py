#  test_training.py - this file is part of the infantcry_tools package.
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
from numpy.testing import assert_array_equal
from infantcry_tools.algorithms import training
from infantcry_tools.common.exceptions import EmptyDataset, NumericError, ShapeMismatch
from infantcry_tools.models import serialization
from infantcry_tools.models.architectures import build_model
from infantcry_tools.utils import audio_utils
from infantcry_tools.utils.audio_utils import AudioClip


def toy_dataset(n_per_class=8, seed=0):
    # class 1 is the same noise shifted up
    rng = np.random.default_rng(seed)
    noise = 0.1 * rng.standard_normal((2 * n_per_class, 1, 16, 16))
    labels = np.repeat([0, 1], n_per_class)
    features = (noise + 2.0 * labels[:, None, None, None]).astype(np.float32)
    return training.Dataset(features, labels, [], ["no-cry", "cry"])


class TestSeeds:

    def test_sub_seed(self):
        assert training.sub_seed(7, "init") == training.sub_seed(7, "init")
        assert training.sub_seed(7, "init") != training.sub_seed(7, "shuffle")
        assert training.sub_seed(7, "init") != training.sub_seed(8, "init")
        assert 0 <= training.sub_seed(2 ** 40, "data") < 2 ** 31

    def test_state_hash_tracks_body(self, tiny_config):
        a, b = build_model(tiny_config, seed=1), build_model(tiny_config, seed=1)
        assert training.state_hash(a) == training.state_hash(b)
        assert training.state_hash(a) != training.state_hash(build_model(tiny_config, seed=2))


class TestBatches:

    def test_trailing_single_clip_merged(self):
        batches = training._batches(np.arange(9), 4)
        assert [len(b) for b in batches] == [4, 5]
        assert_array_equal(np.concatenate(batches), np.arange(9))

    def test_even_split(self):
        assert [len(b) for b in training._batches(np.arange(8), 4)] == [4, 4]
        assert [len(b) for b in training._batches(np.arange(6), 4)] == [4, 2]


class TestDataset:

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            training.Dataset(np.zeros((3, 1, 16, 16)), [0, 1])

    def test_subset(self):
        data = training.Dataset(np.arange(4, dtype=np.float32).reshape(4, 1, 1, 1), [0, 1, 0, 1],
                                ["a", "b", "c", "d"], ["x", "y"])
        sub = data.subset([3, 0])
        assert sub.paths == ["d", "a"]
        assert_array_equal(sub.labels, [1, 0])
        assert len(sub) == 2

    def test_featurize_clips(self, tmp_path):
        rng = np.random.default_rng(0)
        paths = []
        for i, n in enumerate([4000, 12000]):
            path = str(tmp_path / "clip_{}.wav".format(i))
            audio_utils.write_wav(AudioClip(0.3 * rng.uniform(-1.0, 1.0, n)), path)
            paths.append(path)
        data = training.featurize_clips(paths, [0, 1], ["no-cry", "cry"], n_mels=16, clip_seconds=0.5)
        # 0.5 s at 16 kHz, window 512, hop 160
        assert data.features.shape == (2, 1, 47, 16)
        assert data.paths == paths
        with pytest.raises(EmptyDataset):
            training.featurize_clips([], [], ["no-cry", "cry"])


class TestMetrics:

    def test_confusion_rows_are_true_classes(self):
        cm = training.confusion([0, 0, 1, 2], [0, 1, 1, 1], 3)
        assert_array_equal(cm, [[1, 1, 0], [0, 1, 0], [0, 1, 0]])

    def test_metrics_from_predictions(self):
        metrics = training.metrics_from_predictions([0, 0, 0, 1], [0, 0, 1, 1], ["a", "b", "c"])
        assert metrics.accuracy == pytest.approx(0.75)
        assert metrics.per_class_accuracy[0] == pytest.approx(2.0 / 3.0)
        assert metrics.per_class_accuracy[1] == 1.0
        assert metrics.per_class_accuracy[2] is None
        assert np.sum(metrics.confusion_matrix, axis=1).tolist() == [3, 1, 0]
        assert metrics.n_eval == 4
        assert set(metrics.to_dict()) == {"accuracy", "per_class_accuracy", "confusion_matrix", "labels", "n_eval",
                                          "loss_curve", "eval_accuracy_curve"}

    def test_nothing_to_evaluate(self):
        with pytest.raises(EmptyDataset):
            training.metrics_from_predictions([], [], ["a", "b"])

    def test_evaluate_order_invariant(self, tiny_model):
        data = toy_dataset()
        a = training.evaluate(tiny_model, data)
        b = training.evaluate(tiny_model, data.subset(np.random.default_rng(5).permutation(len(data))))
        assert a.accuracy == b.accuracy
        assert a.confusion_matrix == b.confusion_matrix


class TestFit:

    def test_deterministic(self, tiny_config):
        data = toy_dataset()
        runs = []
        for _ in range(2):
            model = build_model(tiny_config, seed=11)
            history = training.fit(model, data, 2, batch_size=5, seed=4)
            runs.append((history, training.state_hash(model), training.state_hash(model, prefix="")))
        assert runs[0][0].loss_curve == runs[1][0].loss_curve
        assert runs[0][0].data_order_hash == runs[1][0].data_order_hash
        assert runs[0][1:] == runs[1][1:]

    def test_shuffle_follows_seed(self, tiny_config):
        data = toy_dataset()
        a = training.fit(build_model(tiny_config, seed=11), data, 1, batch_size=8, seed=1)
        b = training.fit(build_model(tiny_config, seed=11), data, 1, batch_size=8, seed=2)
        assert a.data_order_hash != b.data_order_hash

    def test_loss_decreases(self, tiny_config):
        data = toy_dataset()
        model = build_model(tiny_config, seed=2)
        history = training.fit(model, data, 15, batch_size=8, lr=1e-2, seed=3, eval_set=data)
        assert len(history.loss_curve) == 15
        assert len(history.eval_accuracy_curve) == 15
        assert history.loss_curve[-1] < history.loss_curve[0]

    def test_zero_epochs_keeps_model(self, tiny_config):
        model = build_model(tiny_config, seed=2)
        before = training.state_hash(model, prefix="")
        history = training.fit(model, toy_dataset(), 0)
        assert history.loss_curve == []
        assert training.state_hash(model, prefix="") == before

    def test_non_finite_loss_dumps_model(self, tiny_config, tmp_path):
        model = build_model(tiny_config, seed=2)
        dump = str(tmp_path / "nan_dump.icnm")

        def nan_loss(logits, labels, idx):
            return float("nan"), np.zeros_like(logits)

        with pytest.raises(NumericError):
            training.fit(model, toy_dataset(), 1, batch_size=8, loss_fn=nan_loss, dump_path=dump)
        assert serialization.load_model(dump).config == tiny_config

    def test_empty_training_set(self, tiny_model):
        empty = training.Dataset(np.zeros((0, 1, 16, 16), dtype=np.float32), [])
        with pytest.raises(EmptyDataset):
            training.fit(tiny_model, empty, 1)
        with pytest.raises(EmptyDataset):
            training.evaluate(tiny_model, empty)
