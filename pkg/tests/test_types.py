import numpy as np
import pytest

from bmvseg import FeatureMap, Frame, MotionField, PipelineConfig, SegMap, WarpField
from bmvseg.types import IGNORE_LABEL


def test_frame_accepts_rgb_uint8():
    f = Frame(np.zeros((4, 6, 3), np.uint8), 2)
    assert (f.width, f.height, f.index) == (6, 4, 2)
    assert f.pixels.size == f.width * f.height * 3


@pytest.mark.parametrize("pixels, exc", [
    (np.zeros((4, 6, 3), np.float32), TypeError),
    (np.zeros((4, 6), np.uint8), ValueError),
    (np.zeros((4, 6, 4), np.uint8), ValueError),
    (np.zeros((0, 6, 3), np.uint8), ValueError),
])
def test_frame_rejects_bad_buffers(pixels, exc):
    with pytest.raises(exc):
        Frame(pixels)


def test_frame_rejects_negative_index():
    with pytest.raises(ValueError):
        Frame(np.zeros((2, 2, 3), np.uint8), -1)


def test_containers_are_read_only():
    src = np.zeros((2, 2, 3), np.uint8)
    f = Frame(src)
    with pytest.raises(ValueError):
        f.pixels[0, 0, 0] = 1
    m = FeatureMap(np.ones((1, 2, 2)))
    with pytest.raises(ValueError):
        m.data[0, 0, 0] = 3.0
    with pytest.raises(Exception):
        f.index = 3


def test_motion_field_grid_from_frame_size():
    mv = MotionField.for_frame(40, 17, 16)
    assert (mv.grid_w, mv.grid_h) == (3, 2)
    assert mv.vectors.shape == (2, 3, 2) and not mv.vectors.any()


@pytest.mark.parametrize("vectors", [np.zeros((2, 2)), np.zeros((0, 2, 2)), np.full((1, 1, 2), np.nan)])
def test_motion_field_rejects_bad_vectors(vectors):
    with pytest.raises(ValueError):
        MotionField(vectors)


def test_feature_map_requires_finite_values():
    with pytest.raises(ValueError):
        FeatureMap(np.array([[[np.inf]]]))
    with pytest.raises(ValueError):
        FeatureMap(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        FeatureMap(np.zeros((1, 1, 1)), stride=0)


def test_warp_field_negation_and_shape():
    w = WarpField(np.arange(8.0).reshape(2, 2, 2))
    assert (w.fh, w.fw) == (2, 2)
    assert -(-w) == w
    with pytest.raises(ValueError):
        WarpField(np.zeros((2, 2, 3)))


def test_segmap_label_range():
    SegMap(np.array([[0, 1], [IGNORE_LABEL, 2]]), 3)
    with pytest.raises(ValueError):
        SegMap(np.array([[0, 3]]), 3)
    with pytest.raises(ValueError):
        SegMap(np.array([[0, 300]]))
    with pytest.raises(ValueError):
        SegMap(np.zeros((1, 1), np.uint8), 0)


def test_equality_is_by_value():
    a = FeatureMap(np.ones((2, 2, 2)))
    assert a == FeatureMap(np.ones((2, 2, 2)))
    assert a != FeatureMap(np.ones((2, 2, 2)), stride=8)
    assert SegMap(np.zeros((2, 2))) == SegMap(np.zeros((2, 2), np.uint8))


@pytest.mark.parametrize("kwargs", [
    {"keyframe_interval": 0}, {"fusion": "median"}, {"mode": "flow"}, {"search_radius": -1}, {"block_size": 0},
])
def test_pipeline_config_validation(kwargs):
    with pytest.raises(ValueError):
        PipelineConfig(**kwargs)


def test_pipeline_config_defaults():
    c = PipelineConfig()
    assert (c.keyframe_interval, c.fusion, c.mode, c.block_size) == (4, "average", "inter", 16)
