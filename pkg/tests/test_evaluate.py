from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from bmvseg import (IntervalReport, SegMap, intermediate_cost_reduction, min_accuracy, miou, per_offset_miou,
                    speedup, sweep, throughput_model)
from bmvseg.evaluate import CAMVID_REFERENCE, component_times, confusion_matrix, fusion_ablation, measure


def seg(rows):
    return SegMap(np.array(rows))


def test_perfect_prediction():
    g = seg([[0, 1], [2, 2]])
    per, mean = miou([g], [g], 4)
    assert mean == 1.0 and np.isnan(per[3])


def test_worked_two_by_two_example():
    per, mean = miou([seg([[0, 1], [1, 1]])], [seg([[0, 0], [1, 1]])], 2, exact=True)
    assert per == [Fraction(1, 2), Fraction(2, 3)]
    assert mean == Fraction(7, 12)
    assert miou([seg([[0, 1], [1, 1]])], [seg([[0, 0], [1, 1]])], 2)[1] == pytest.approx(7 / 12)


def test_all_ignore_ground_truth_rejected():
    with pytest.raises(ValueError):
        miou([seg([[0, 1]])], [seg([[255, 255]])], 2)


def test_shape_mismatch_rejected():
    with pytest.raises(ValueError):
        miou([seg([[0, 1]])], [seg([[0], [1]])], 2)
    with pytest.raises(ValueError):
        miou([seg([[0]])], [], 2)


def test_ignore_pixels_and_out_of_range_predictions():
    cm = confusion_matrix([seg([[0, 7, 1]])], [seg([[0, 1, 255]])], 2)
    assert cm.tolist() == [[1, 0, 0], [0, 0, 1]]


def test_false_positive_only_class_counts_as_zero():
    per, mean = miou([seg([[0, 1]])], [seg([[0, 0]])], 2, exact=True)
    assert per == [Fraction(1, 2), Fraction(0)] and mean == Fraction(1, 4)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_property_matches_pixel_counting(seed):
    r = np.random.default_rng(seed)
    h, w, c = r.integers(1, 9), r.integers(1, 9), int(r.integers(1, 5))
    frames = int(r.integers(1, 4))
    gts = [r.choice(list(range(c)) + [255], size=(h, w)) for _ in range(frames)]
    preds = [r.integers(0, c, size=(h, w)) for _ in range(frames)]
    if all((g == 255).all() for g in gts):
        gts[0][0, 0] = 0
    per, mean = miou([SegMap(p) for p in preds], [SegMap(g) for g in gts], c, exact=True)
    o_per, o_mean = oracles.pixel_count_miou(preds, gts, c)
    assert per == o_per and mean == o_mean


def test_min_accuracy_examples():
    assert min_accuracy([68.5, 68.6, 68.4]) == 68.4
    assert min_accuracy([68.6]) == 68.6
    assert min_accuracy([5.0] * 4) == 5.0
    with pytest.raises(ValueError):
        min_accuracy([])


def test_per_offset_groups_by_interval_position():
    gts = [seg([[0, 1]])] * 4
    preds = [seg([[0, 1]]), seg([[1, 1]]), seg([[0, 1]]), seg([[1, 1]])]
    vals = per_offset_miou(preds, gts, 2, 2)
    assert vals == [100.0, 25.0]
    assert min_accuracy(vals) == 25.0


def test_interval_report_validation():
    IntervalReport(2, "prop", 50.0, 40.0, 10.0, [60.0, 40.0])
    with pytest.raises(ValueError):
        IntervalReport(2, "prop", 50.0, 40.0, 10.0, [60.0])
    with pytest.raises(ValueError):
        IntervalReport(1, "prop", 101.0, 40.0, 10.0, [60.0])


def test_runtime_cut_from_breakdown():
    # 62 ms of flow on top of 54 ms of warp + task
    cut = intermediate_cost_reduction(62.0, 4.0, 50.0)
    assert 1 - cut == pytest.approx(54 / 116)
    assert round(100 * cut) == 53


def test_speedup_limits():
    assert speedup(1, 1.0, 0.5) == 1.0
    assert speedup(8, 1.0, 0.0) == 8.0
    assert speedup(10, 1.0, 1e-9) == pytest.approx(10, rel=1e-6)


def test_throughput_model_matches_frame_loop(rng):
    for _ in range(100):
        t_feat, t_warp, t_task, t_flow, t_fuse = rng.uniform(1e-4, 1.0, 5)
        n = int(rng.integers(1, 12))
        model = throughput_model(t_feat, t_warp, t_task, t_flow, n, t_fuse)
        for scheme, fps in model.items():
            sim = oracles.simulate_fps(scheme, t_feat, t_warp, t_task, t_flow, n, t_fuse)
            assert fps == pytest.approx(sim, rel=1e-9)


def test_throughput_model_rejects_nonpositive():
    with pytest.raises(ValueError):
        throughput_model(0.0, 1, 1, 1, 2)
    with pytest.raises(ValueError):
        throughput_model(1, 1, 1, 1, 2, t_fuse=-1)


def test_throughput_model_approaches_n():
    for n in (2, 5, 10):
        m = throughput_model(1.0, 1e-12, 1e-12, 1e-12, n)
        assert m["prop"] / m["baseline"] == pytest.approx(n, rel=1e-9)


def test_sweep_interval_one_collapses(small_scene, small_model, small_fields):
    reports = sweep(small_scene, ["baseline", "prop", "inter"], [1], small_model, motion_fields=small_fields,
                    repeats=1)
    assert len({r.miou_avg for r in reports}) == 1
    assert all(r.miou_avg == r.miou_min for r in reports)


def test_sweep_is_deterministic(small_scene, small_model, small_fields):
    a = sweep(small_scene, ["prop", "inter"], [2, 3], small_model, motion_fields=small_fields, repeats=1)
    b = sweep(small_scene, ["prop", "inter"], [2, 3], small_model, motion_fields=small_fields, repeats=1)
    assert [(r.miou_avg, r.miou_min, r.per_offset_miou) for r in a] == \
        [(r.miou_avg, r.miou_min, r.per_offset_miou) for r in b]
    assert all(len(r.per_offset_miou) == r.keyframe_interval for r in a)


def test_sweep_errors_carry_context(small_scene, small_model, small_fields):
    with pytest.raises(RuntimeError, match="scheme=flow, interval=2"):
        sweep(small_scene, ["flow"], [2], small_model, motion_fields=small_fields, repeats=1)
    with pytest.raises(ValueError):
        sweep(small_scene, ["prop"], [13], small_model, motion_fields=small_fields)


def test_sweep_motion_cost_flag(small_scene, small_model):
    from bmvseg.scene import make_scene
    fresh = make_scene(small_scene.spec)
    without = sweep(fresh, ["prop"], [3], small_model, repeats=1)[0]
    with_cost = sweep(fresh, ["prop"], [3], small_model, repeats=1, include_motion_cost=True)[0]
    assert with_cost.throughput < without.throughput


def test_measure_and_component_times(small_scene, small_model, small_fields):
    result, fps = measure("prop", small_scene.frames, small_fields, 3, small_model, repeats=2)
    assert fps > 0
    times = component_times(result)
    assert set(times) == {"feature", "warp", "task"}


def test_fusion_ablation_shape(small_scene, small_model, small_fields):
    out = fusion_ablation(small_scene, 3, small_model, motion_fields=small_fields)
    assert set(out) == {"forward", "backward", "average", "max"}
    assert all(len(v) == 2 for v in out.values())
    with pytest.raises(ValueError):
        fusion_ablation(small_scene, 1, small_model, motion_fields=small_fields)


def test_reference_table_is_metadata_only():
    for cols in CAMVID_REFERENCE.values():
        assert all(len(v) == 10 for v in cols.values())
        assert cols["miou_avg"][0] >= cols["miou_min"][0]


def test_new_object_property(bench_scene, bench_model, bench_fields):
    reports = sweep(bench_scene, ["prop", "inter"], range(3, 9), bench_model, motion_fields=bench_fields, repeats=1)
    by = {(r.scheme, r.keyframe_interval): r for r in reports}
    for n in range(3, 9):
        assert by["inter", n].miou_min > by["prop", n].miou_min
