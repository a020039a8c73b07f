import json

import numpy as np
import pytest

from bmvseg import SceneSpec, bundled_scene, load_spec, make_scene


def spec(objects, **kw):
    d = {"width": 96, "height": 48, "num_frames": 5, "seed": 2,
         "background": [{"class": 0, "y0": 0, "y1": 48}], "objects": objects}
    d.update(kw)
    return d


def test_zero_velocity_scene_is_static():
    s = make_scene(spec([{"class": 1, "size": [16, 16], "position": [10, 10]}]))
    assert all(f.pixels.tobytes() == s.frames[0].pixels.tobytes() for f in s.frames)
    assert all(g == s.ground_truth[0] for g in s.ground_truth)
    assert [f.index for f in s.frames] == list(range(5))


def test_object_translates_by_velocity():
    s = make_scene(spec([{"class": 1, "size": [16, 16], "position": [0, 16], "velocity": [16, 0]}]))
    first = s.frames[0].pixels[16:32, 0:16]
    for t in range(1, 5):
        np.testing.assert_array_equal(s.frames[t].pixels[16:32, 16 * t:16 * t + 16], first)
        assert (s.ground_truth[t].labels[16:32, 16 * t:16 * t + 16] == 1).all()


def test_object_entry_time():
    s = make_scene(spec([{"class": 2, "size": [8, 8], "position": [40, 20], "enter": 3}]))
    for t, g in enumerate(s.ground_truth):
        assert ((g.labels == 2).any()) == (t >= 3)


def test_exit_and_disk_shape():
    s = make_scene(spec([{"class": 1, "shape": "disk", "size": [20, 20], "position": [30, 10], "exit": 2}]))
    assert (s.ground_truth[1].labels == 1).sum() < 400
    assert not (s.ground_truth[2].labels == 1).any()


@pytest.mark.parametrize("bad", [
    {"objects": [{"class": 1, "size": [8, 8], "position": [0, 0], "velocity": [40, 0]}]},
    {"objects": [{"class": 1, "size": [8, 8], "position": [0, 0], "shape": "star"}]},
    {"objects": [{"class": 1, "size": [0, 8], "position": [0, 0]}]},
    {"objects": [{"class": 1, "size": [8, 8], "position": [0, 0], "enter": 9}]},
    {"objects": [{"size": [8, 8], "position": [0, 0]}]},
    {"width": 8},
    {"num_frames": 0},
])
def test_invalid_specs_rejected(bad):
    d = spec([])
    d.update(bad)
    with pytest.raises(ValueError):
        make_scene(d)


def test_seed_controls_texture_only():
    d = spec([{"class": 1, "size": [16, 16], "position": [4, 4], "velocity": [2, 1]}])
    a, b, c = make_scene(d), make_scene(d), make_scene(d, seed=9)
    assert a.frames == b.frames
    assert a.frames != c.frames
    assert a.ground_truth == c.ground_truth


def test_spec_round_trip(tmp_path):
    s = SceneSpec.from_dict(spec([{"class": 3, "size": [8, 8], "position": [1, 2], "velocity": [1, 0]}]))
    path = tmp_path / "s.json"
    path.write_text(json.dumps(s.to_dict()))
    assert load_spec(path) == s
    assert load_spec(s.to_dict()) == s
    assert s.num_classes == 4
    with pytest.raises(ValueError):
        load_spec("no-such-scene")


def test_bundled_benchmark_layout():
    s = bundled_scene()
    assert len(s) == 60 and (s.frames[0].width, s.frames[0].height) == (256, 192)
    first_disk = min(o.enter for o in s.spec.objects if o.cls == 4)
    assert first_disk > 0
    present = [bool((g.labels == 4).any()) for g in s.ground_truth]
    assert present == [t >= first_disk for t in range(60)]
