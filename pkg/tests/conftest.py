from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from bmvseg import ToyModel, make_scene  # noqa: E402
from bmvseg.motion import MatchParams  # noqa: E402
from bmvseg.scene import bundled_scene, fit_scene_model, scene_motion  # noqa: E402

SMALL_SPEC = {
    "width": 96, "height": 64, "num_frames": 12, "seed": 5,
    "background": [{"class": 0, "y0": 0, "y1": 16, "color": [120, 160, 220]},
                   {"class": 1, "y0": 16, "y1": 64, "color": [100, 100, 100]}],
    "objects": [
        {"class": 2, "size": [32, 32], "position": [0, 24], "velocity": [5, 0], "color": [210, 40, 40]},
        {"class": 3, "shape": "disk", "size": [24, 24], "position": [70, 2], "velocity": [-4, 1],
         "color": [40, 200, 60], "enter": 5},
    ],
}


@pytest.fixture(scope="session")
def small_scene():
    return make_scene(SMALL_SPEC)


@pytest.fixture(scope="session")
def small_model(small_scene):
    return fit_scene_model(small_scene)


@pytest.fixture(scope="session")
def small_fields(small_scene):
    return scene_motion(small_scene, MatchParams(search_radius=8))


@pytest.fixture(scope="session")
def bench_scene():
    return bundled_scene()


@pytest.fixture(scope="session")
def bench_model(bench_scene):
    return fit_scene_model(bench_scene)


@pytest.fixture(scope="session")
def bench_fields(bench_scene):
    return scene_motion(bench_scene)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_model(num_classes=4, seed=0) -> ToyModel:
    return ToyModel.random(num_classes, seed=seed)
