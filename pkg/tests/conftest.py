from typing import Dict

import numpy as np
import pytest

from terranp.core import TerraNP
from terranp.core.configuration import Config
from terranp.core.dataset import Dataset
from terranp.core.state import GlobalState
from terranp.plugins.runners import SerialRunner
from terranp.world.scenes import make_dataset

global_data = GlobalState()

SMALL = {
    "grid": {"origin_x": -8.0, "origin_y": -8.0, "resolution": 0.5, "height": 32, "width": 32},
    "sensor": {"azimuth_count": 120, "beams": 8, "max_range": 16.0, "march_step": 0.1},
    "semantics": {"feature_dim": 8, "camera_range": 10.0},
    "world": {
        "scenes": 2,
        "frames": 3,
        "gt_window": 3,
        "features_per_scene": 2,
        "speed_min": 2.0,
        "speed_max": 3.0,
    },
    "model": {
        "hidden": 8,
        "heads": 2,
        "z_dim": 4,
        "fused_dim": 4,
        "k_max": 8,
        "max_context": 128,
        "min_context": 16,
        "max_targets": 96,
    },
    "train": {"epochs": 2, "seed": 3},
    "logging": {"enabled": False},
}


def small_sections() -> Dict[str, Dict]:
    return {name: dict(values) for name, values in SMALL.items()}


@pytest.fixture(scope="session")
def small_config() -> Config:
    return Config.from_dict(**small_sections())


@pytest.fixture(scope="session")
def dataset(small_config) -> Dataset:
    """Two scenes of three frames each, generated once per session"""
    return make_dataset(11, small_config)


@pytest.fixture(scope="function")
def terranp(dataset, small_config):
    return TerraNP(dataset=dataset, config=small_config, runner=SerialRunner(), data=global_data)


@pytest.fixture(scope="function", autouse=True)
def reset_data():
    global_data.reset_failed_frames()


@pytest.fixture(scope="function", autouse=True)
def quiet_logging(monkeypatch):
    monkeypatch.setenv("TERRANP_LOGGING_ENABLED", "false")


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
