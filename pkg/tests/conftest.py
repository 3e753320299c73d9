#  conftest.py - this file is part of the infantcry_tools package.
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
from infantcry_tools.algorithms import experiments
from infantcry_tools.models.architectures import ModelConfig, build_model
from infantcry_tools.synth import synthdata
from infantcry_tools.utils import file_utils

TINY_SECONDS = 0.5
TINY_PER_CLASS = 6


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_config():
    return ModelConfig(arch="CNN10", width_mult="1/8", n_mels=16, n_classes=2, pool_head="statistic",
                       task="detect", clip_seconds=TINY_SECONDS)


@pytest.fixture
def tiny_model(tiny_config):
    return build_model(tiny_config, seed=3)


@pytest.fixture
def tiny_input(rng):
    return rng.standard_normal((3, 1, 16, 16)).astype(np.float32)


def _run_config(data_dir, out_dir, **overrides):
    values = {"data_dir": str(data_dir), "out_dir": str(out_dir), "clip_seconds": TINY_SECONDS, "n_mels": 32,
              "epochs": 2, "batch_size": 4, "n_per_class": TINY_PER_CLASS}
    values.update(overrides)
    return file_utils.RunConfig(values)


@pytest.fixture
def make_run_config():
    """Factory of small RunConfigs: (data_dir, out_dir, **overrides)."""
    return _run_config


@pytest.fixture(scope="session")
def detect_data(tmp_path_factory):
    """Small synthetic detection set shared by the pipeline tests."""
    data_dir = tmp_path_factory.mktemp("detect_data")
    synthdata.gen_dataset("detect", TINY_PER_CLASS, 7, str(data_dir), duration_s=TINY_SECONDS)
    return str(data_dir)


@pytest.fixture(scope="session")
def trained_run(detect_data, tmp_path_factory):
    """One short training run: (config, out_dir, metrics)."""
    out_dir = str(tmp_path_factory.mktemp("trained_run"))
    cfg = _run_config(detect_data, out_dir)
    metrics = experiments.cmd_train(cfg, out_dir)
    return cfg, out_dir, metrics