"""Accuracy metrics, keyframe-interval sweeps and the throughput model."""
from __future__ import annotations

import statistics
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from ._validation import check_frames, check_segmaps
from .fusion import FusionWeights
from .pipeline import _run_interpolation, fusion_combine, run_baseline, run_inter, run_prop
from .types import IGNORE_LABEL, SegMap

SCHEMES = ("baseline", "prop", "inter")

# Published full-scale numbers (CamVid, DeepLab), kept only as context for reports.
CAMVID_REFERENCE = {
    "prop-flow": {"miou_avg": [68.6, 67.8, 67.4, 66.3, 66.0, 65.8, 64.2, 63.6, 64.0, 63.1],
                  "miou_min": [68.5, 67.0, 66.2, 64.9, 63.6, 62.7, 61.3, 60.5, 59.7, 58.7],
                  "fps": [3.6, 6.2, 8.0, 9.4, 10.5, 11.0, 11.7, 12.0, 13.3, 13.7]},
    "prop": {"miou_avg": [68.6, 67.8, 67.3, 66.2, 65.9, 65.7, 64.2, 63.7, 63.8, 63.4],
             "miou_min": [68.5, 67.0, 65.9, 64.7, 63.4, 62.7, 61.4, 60.8, 60.0, 59.3],
             "fps": [3.6, 6.7, 9.3, 11.6, 13.6, 15.3, 17.0, 18.2, 20.2, 21.3]},
    "inter": {"miou_avg": [68.6, 68.7, 68.7, 68.4, 68.4, 68.2, 68.0, 67.5, 67.0, 67.3],
              "miou_min": [68.5, 68.6, 68.4, 68.2, 67.9, 67.4, 67.0, 66.4, 66.1, 65.7],
              "fps": [3.6, 6.6, 9.1, 11.3, 13.1, 14.7, 16.2, 17.3, 19.1, 20.1]},
}


def confusion_matrix(preds: Sequence[SegMap], gts: Sequence[SegMap], num_classes: int) -> np.ndarray:
    """``cm[g, p]`` counts valid pixels with truth ``g`` and prediction ``p``.

    Column ``num_classes`` collects predictions outside ``0..num_classes-1``.
    """
    preds, gts = check_segmaps(preds, gts)
    cm = np.zeros((num_classes, num_classes + 1), dtype=np.int64)
    for p, g in zip(preds, gts):
        gl = g.labels.ravel()
        valid = gl != IGNORE_LABEL
        gl = gl[valid].astype(np.int64)
        if gl.size and gl.max() >= num_classes:
            raise ValueError(f"ground-truth label {int(gl.max())} >= num_classes={num_classes}")
        pl = p.labels.ravel()[valid].astype(np.int64)
        pl = np.where(pl < num_classes, pl, num_classes)
        cm += np.bincount(gl * (num_classes + 1) + pl,
                          minlength=num_classes * (num_classes + 1)).reshape(cm.shape)
    return cm


def miou(preds: Sequence[SegMap], gts: Sequence[SegMap], num_classes: int, exact: bool = False):
    """Per-class IoU and their mean, aggregated over all frames.

    IoU is TP / (TP + FP + FN). Classes absent from both predictions and
    ground truth are left out of the mean (NaN / ``None`` per class).
    ``exact=True`` returns :class:`fractions.Fraction` values.
    """
    cm = confusion_matrix(preds, gts, num_classes)
    if cm.sum() == 0:
        raise ValueError("no valid (non-ignore) ground-truth pixels")
    tp = np.diag(cm[:, :num_classes])
    fn = cm.sum(axis=1) - tp
    fp = cm[:, :num_classes].sum(axis=0) - tp
    union = tp + fp + fn
    if exact:
        per_class = [Fraction(int(t), int(u)) if u else None for t, u in zip(tp, union)]
        present = [v for v in per_class if v is not None]
        return per_class, sum(present, Fraction(0)) / len(present)
    with np.errstate(invalid="ignore", divide="ignore"):
        per_class = np.where(union > 0, tp / np.maximum(union, 1), np.nan)
    return per_class, float(np.nanmean(per_class))


def per_offset_miou(preds, gts, n: int, num_classes: int, frame_indices: Optional[Sequence[int]] = None) -> list[float]:
    """mIoU of the frames at each keyframe offset ``i % n``, in percent."""
    preds, gts = check_segmaps(preds, gts)
    idx = range(len(preds)) if frame_indices is None else frame_indices
    out = []
    for o in range(n):
        sel = [j for j, i in enumerate(idx) if i % n == o]
        if not sel:
            out.append(float("nan"))
            continue
        out.append(100.0 * miou([preds[j] for j in sel], [gts[j] for j in sel], num_classes)[1])
    return out


def min_accuracy(per_offset: Sequence[float]) -> float:
    values = [v for v in per_offset if v == v]
    if not values:
        raise ValueError("min_accuracy needs at least one value")
    return min(values)


@dataclass
class IntervalReport:
    keyframe_interval: int
    scheme: str
    miou_avg: float
    miou_min: float
    throughput: float
    per_offset_miou: list[float] = field(default_factory=list)

    def __post_init__(self):
        if len(self.per_offset_miou) != self.keyframe_interval:
            raise ValueError("per_offset_miou must have one entry per keyframe offset")
        for name in ("miou_avg", "miou_min"):
            if not 0.0 <= getattr(self, name) <= 100.0:
                raise ValueError(f"{name} must be a percentage, got {getattr(self, name)}")


def _run_scheme(scheme, frames, fields, n, model, weights):
    if scheme == "baseline":
        return run_baseline(frames, model)
    if scheme == "prop":
        return run_prop(frames, fields, n, model)
    if scheme == "inter":
        return run_inter(frames, fields, n, model, weights)
    raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")


def measure(scheme, frames, fields, n, model, weights=None, repeats: int = 3,
            motion_seconds: float = 0.0):
    """Run a scheme ``repeats`` times; returns the result and median fps."""
    elapsed = []
    result = None
    for _ in range(max(1, repeats)):
        t0 = time.perf_counter()
        result = _run_scheme(scheme, frames, fields, n, model, weights)
        elapsed.append(time.perf_counter() - t0 + motion_seconds)
    return result, len(frames) / statistics.median(elapsed)


def sweep(scene, schemes: Sequence[str], intervals: Sequence[int], model,
          fusion="average", motion_fields=None, repeats: int = 3,
          include_motion_cost: bool = False, motion_seconds: float = 0.0) -> list[IntervalReport]:
    """Accuracy and measured throughput of each scheme at each interval.

    ``fusion`` is a kind name or fitted :class:`FusionWeights`. Motion
    fields are estimated once when not supplied; their cost (or the given
    ``motion_seconds`` for supplied fields) is added to the timings only
    with ``include_motion_cost``.
    """
    from .scene import scene_motion_timed

    frames = check_frames(scene.frames)
    gts = list(scene.ground_truth)
    if motion_fields is None:
        motion_fields, motion_seconds = scene_motion_timed(scene)
    weights = fusion if isinstance(fusion, FusionWeights) else FusionWeights(fusion)
    num_classes = model.num_classes
    reports = []
    for scheme in schemes:
        for n in intervals:
            if not 1 <= n <= len(frames):
                raise ValueError(f"interval {n} outside 1..{len(frames)}")
            try:
                result, fps = measure(scheme, frames, motion_fields, n, model, weights, repeats,
                                      motion_seconds if include_motion_cost and scheme != "baseline" else 0.0)
                offsets = per_offset_miou(result.segmentations, gts, n, num_classes)
                avg = 100.0 * miou(result.segmentations, gts, num_classes)[1]
            except Exception as exc:
                raise RuntimeError(f"sweep failed for scheme={scheme}, interval={n}: {exc}") from exc
            reports.append(IntervalReport(n, scheme, avg, min_accuracy(offsets), fps, offsets))
    return reports


def fusion_ablation(scene, n: int, model, kinds=("forward", "backward", "average", "max"),
                    motion_fields=None, conv_weights: Optional[FusionWeights] = None) -> dict[str, list[float]]:
    """Per-offset mIoU (offsets 1..n-1) of interpolation with different combiners.

    ``forward`` and ``backward`` use a single warped map; the other kinds
    fuse both. Only frames inside complete keyframe intervals are scored.
    """
    from .scene import scene_motion

    if n < 2:
        raise ValueError("fusion ablation needs keyframe_interval >= 2")
    frames = check_frames(scene.frames)
    gts = list(scene.ground_truth)
    fields = scene_motion(scene) if motion_fields is None else motion_fields
    last_key = ((len(frames) - 1) // n) * n
    scored = [i for i in range(last_key) if i % n]
    out = {}
    for kind in kinds:
        if kind == "forward":
            combine = lambda ff, fb, p, n: ff
        elif kind == "backward":
            combine = lambda ff, fb, p, n: fb
        elif kind == "conv":
            combine = fusion_combine(conv_weights)
        else:
            combine = fusion_combine(FusionWeights(kind))
        result = _run_interpolation(frames, fields, n, model, combine)
        preds = [result.segmentations[i] for i in scored]
        per = per_offset_miou(preds, [gts[i] for i in scored], n, model.num_classes, scored)
        out[kind] = per[1:]
    return out


def throughput_model(t_feat: float, t_warp: float, t_task: float, t_flow: float, n: int,
                     t_fuse: float = 0.0) -> dict[str, float]:
    """Steady-state frames per second predicted for each scheme.

    Keyframes cost ``t_feat + t_task``. Intermediate frames cost
    ``t_warp + t_task`` under block-motion propagation, plus ``t_flow``
    with optical flow, and ``2 t_warp + t_fuse + t_task`` under
    interpolation, which still runs one feature pass per interval.
    """
    for name, v in (("t_feat", t_feat), ("t_warp", t_warp), ("t_task", t_task), ("t_flow", t_flow)):
        if v <= 0:
            raise ValueError(f"{name} must be positive, got {v}")
    if t_fuse < 0:
        raise ValueError(f"t_fuse must be non-negative, got {t_fuse}")
    key = t_feat + t_task
    return {
        "baseline": 1.0 / key,
        "prop": n / (key + (n - 1) * (t_warp + t_task)),
        "prop-flow": n / (key + (n - 1) * (t_flow + t_warp + t_task)),
        "inter": n / (key + (n - 1) * (2 * t_warp + t_fuse + t_task)),
    }


def intermediate_cost_reduction(t_flow: float, t_warp: float, t_task: float) -> float:
    """Fractional saving on an intermediate frame from dropping flow estimation."""
    return 1.0 - (t_warp + t_task) / (t_flow + t_warp + t_task)


def speedup(n: int, keyframe_cost: float, intermediate_cost: float) -> float:
    """Throughput gain over running the keyframe path on every frame."""
    return n * keyframe_cost / (keyframe_cost + (n - 1) * intermediate_cost)


def component_times(result) -> dict[str, float]:
    """Mean seconds per invocation of each component over a stream."""
    totals: dict[str, list[float]] = {}
    for record in result.per_frame_cost:
        for k, v in record.items():
            totals.setdefault(k, []).append(v)
    return {k: sum(v) / len(v) for k, v in totals.items()}
