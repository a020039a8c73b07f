"""Per-frame baseline, keyframe feature propagation and feature interpolation."""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, clone
from sklearn.utils.validation import check_is_fitted

from ._validation import check_frames, check_motion_fields, check_positive_int
from .fusion import FusionWeights, alpha_for, fit_conv_fusion, fuse
from .model import ToyModel
from .motion import MatchParams, estimate_stream, to_warp_field
from .types import MODES, FeatureMap, Frame, MotionField, PipelineConfig, SegMap
from .warp import propagate_chain, warp_displacement

# combine(forward_map, backward_map, p, n) -> fused map for offset p
Combine = Callable[[FeatureMap, FeatureMap, int, int], FeatureMap]


@dataclass(eq=False)
class StreamResult:
    """Segmentations for a stream plus per-frame timing.

    ``per_frame_cost[i]`` maps a component name (``feature``, ``warp``,
    ``fusion``, ``task``) to seconds spent on it for frame ``i``. Work done
    at a keyframe on behalf of later frames is charged to the keyframe.
    Equality ignores timings.
    """

    segmentations: list[SegMap]
    per_frame_cost: list[dict[str, float]]
    keyframe_flags: list[bool]
    latency_frames: int = 0
    motion_seconds: float = 0.0
    feature_calls: int = 0

    def __post_init__(self):
        n = len(self.segmentations)
        if len(self.per_frame_cost) != n or len(self.keyframe_flags) != n:
            raise ValueError("segmentations, costs and keyframe flags must have equal length")

    def __len__(self):
        return len(self.segmentations)

    def __eq__(self, other):
        if not isinstance(other, StreamResult):
            return NotImplemented
        return (self.keyframe_flags == other.keyframe_flags
                and self.latency_frames == other.latency_frames
                and len(self) == len(other)
                and all(a == b for a, b in zip(self.segmentations, other.segmentations)))

    def total_seconds(self, include_motion: bool = False) -> float:
        total = sum(sum(c.values()) for c in self.per_frame_cost)
        return total + (self.motion_seconds if include_motion else 0.0)


class _Clock:
    """Accumulates elapsed time per component into a cost record."""

    def __init__(self, record: dict):
        self.record = record

    def run(self, component: str, fn, *args):
        t0 = time.perf_counter()
        out = fn(*args)
        self.record[component] = self.record.get(component, 0.0) + time.perf_counter() - t0
        return out


def _warp_field(mv: MotionField, f: FeatureMap):
    return to_warp_field(mv, f.stride, (f.fh, f.fw))


def _task(model, f: FeatureMap, frame: Frame) -> SegMap:
    seg = model.task(f)
    if (seg.height, seg.width) != (frame.height, frame.width):
        seg = SegMap(seg.labels[:frame.height, :frame.width], seg.num_classes)
    return seg


def _feature(model, frame: Frame) -> FeatureMap:
    try:
        return model.features(frame)
    except Exception as exc:
        try:
            wrapped = type(exc)(f"frame {frame.index}: {exc}")
        except Exception:
            wrapped = RuntimeError(f"frame {frame.index}: {exc}")
        raise wrapped from exc


def run_baseline(frames: Sequence[Frame], model) -> StreamResult:
    """Full model on every frame."""
    frames = check_frames(frames)
    segs, costs = [], []
    for frame in frames:
        clock = _Clock({})
        f = clock.run("feature", _feature, model, frame)
        segs.append(clock.run("task", _task, model, f, frame))
        costs.append(clock.record)
    return StreamResult(segs, costs, [True] * len(frames), feature_calls=len(frames))


def run_prop(frames: Sequence[Frame], motion_fields: Sequence[MotionField], config, model) -> StreamResult:
    """Feature propagation: keyframe features warped forward frame by frame.

    On frame ``i`` with ``i % n == 0`` features are computed; otherwise the
    cached features of frame ``i - 1`` are warped with ``-mv[i]``.
    """
    n = _interval(config)
    frames = check_frames(frames)
    fields = check_motion_fields(motion_fields, len(frames)) if n > 1 else motion_fields
    segs, costs, flags = [], [], []
    cached = None
    calls = 0
    for i, frame in enumerate(frames):
        clock = _Clock({})
        if i % n == 0:
            f = clock.run("feature", _feature, model, frame)
            calls += 1
        else:
            g = _warp_field(fields[i], cached)
            f = clock.run("warp", warp_displacement, cached, -g)
        segs.append(clock.run("task", _task, model, f, frame))
        costs.append(clock.record)
        flags.append(i % n == 0)
        cached = f
    return StreamResult(segs, costs, flags, feature_calls=calls)


def interval_chains(f_key: FeatureMap, f_next: FeatureMap, fields: Sequence[MotionField], k: int, n: int):
    """Forward and backward warp chains for the interval starting at keyframe ``k``.

    ``forward[p]`` is ``f_key`` carried ``p`` frames forward with
    ``-mv[k+1] .. -mv[k+p]``; ``backward[q]`` is ``f_next`` carried ``q``
    frames backward with ``mv[k+n], mv[k+n-1], ..``. Both have ``n``
    entries, so frame ``k + p`` pairs ``forward[p]`` with ``backward[n - p]``.
    """
    fwd = [-_warp_field(fields[j], f_key) for j in range(k + 1, k + n)]
    bwd = [_warp_field(fields[j], f_next) for j in range(k + n, k + 1, -1)]
    forward = propagate_chain(f_key, n - 1, fwd, warp_displacement)
    backward = propagate_chain(f_next, n - 1, bwd, warp_displacement)
    return forward, backward


def fusion_combine(weights: FusionWeights) -> Combine:
    def combine(ff, fb, p, n):
        return fuse(ff, fb, alpha_for(n, p)[0], weights)
    return combine


def _run_interpolation(frames, fields, n, model, combine: Combine, pipelined=False, on_interval=None):
    """Shared driver for feature interpolation with an arbitrary combiner.

    Keyframe features for ``k + n`` are computed once and reused when the
    window reaches ``k + n``. Frames after the last complete interval fall
    back to forward propagation.
    """
    m = len(frames)
    segs: list = [None] * m
    costs: list = [dict() for _ in range(m)]
    flags = [i % n == 0 for i in range(m)]
    calls = 0
    pool = ThreadPoolExecutor(max_workers=1) if pipelined else None
    pending = None
    f_key = None
    try:
        for k in range(0, m, n):
            clock = _Clock(costs[k])
            if f_key is None:
                f_key = clock.run("feature", _feature, model, frames[k])
                calls += 1
            segs[k] = clock.run("task", _task, model, f_key, frames[k])
            nxt = k + n
            if nxt >= m:
                cached = f_key
                for i in range(k + 1, m):
                    c = _Clock(costs[i])
                    g = _warp_field(fields[i], cached)
                    cached = c.run("warp", warp_displacement, cached, -g)
                    segs[i] = c.run("task", _task, model, cached, frames[i])
                break
            if pending is not None:
                t0 = time.perf_counter()
                f_next = pending.result()
                clock.record["feature"] = clock.record.get("feature", 0.0) + time.perf_counter() - t0
            else:
                f_next = clock.run("feature", _feature, model, frames[nxt])
            calls += 1
            pending = None
            if pool is not None and nxt + n < m:
                pending = pool.submit(_feature, model, frames[nxt + n])
            forward, backward = clock.run("warp", interval_chains, f_key, f_next, fields, k, n)
            if on_interval is not None:
                on_interval(k, forward, backward)
            for p in range(1, n):
                i = k + p
                c = _Clock(costs[i])
                f_i = c.run("fusion", combine, forward[p], backward[n - p], p, n)
                segs[i] = c.run("task", _task, model, f_i, frames[i])
            f_key = f_next
    finally:
        if pool is not None:
            pool.shutdown(wait=True)
    return StreamResult(segs, costs, flags, latency_frames=n if n > 1 else 0, feature_calls=calls)


def run_inter(frames: Sequence[Frame], motion_fields: Sequence[MotionField], config, model,
              weights: Optional[FusionWeights] = None, pipelined: bool = False) -> StreamResult:
    """Feature interpolation between enclosing keyframes.

    Intermediate frame ``k + p`` fuses the previous keyframe's features
    carried ``p`` frames forward with the next keyframe's features carried
    ``n - p`` frames backward, weighted ``(n - p) / n`` and ``p / n``.
    ``pipelined`` overlaps the next keyframe's feature pass with the
    current interval; outputs are identical either way.
    """
    n = _interval(config)
    frames = check_frames(frames)
    if n == 1:
        return run_baseline(frames, model)
    fields = check_motion_fields(motion_fields, len(frames))
    if weights is None:
        kind = getattr(config, "fusion", "average")
        if kind == "conv":
            raise ValueError("conv fusion requires fitted FusionWeights")
        weights = FusionWeights(kind)
    return _run_interpolation(frames, fields, n, model, fusion_combine(weights), pipelined)


def _interval(config) -> int:
    n = config if isinstance(config, int) else config.keyframe_interval
    return check_positive_int(n, "keyframe_interval")


def run_stream(frames, motion_fields, config: PipelineConfig, model, weights=None) -> StreamResult:
    if config.mode == "baseline":
        return run_baseline(frames, model)
    if config.mode == "prop":
        return run_prop(frames, motion_fields, config, model)
    return run_inter(frames, motion_fields, config, model, weights)


def conv_training_samples(frames, motion_fields, n: int, model):
    """(forward, backward, true features) triples and their weights for conv fitting."""
    frames = check_frames(frames)
    fields = check_motion_fields(motion_fields, len(frames))
    samples, alphas = [], []
    feats = {}

    def feat(i):
        if i not in feats:
            feats[i] = model.features(frames[i])
        return feats[i]

    for k in range(0, len(frames) - n, n):
        forward, backward = interval_chains(feat(k), feat(k + n), fields, k, n)
        for p in range(1, n):
            samples.append((forward[p], backward[n - p], feat(k + p)))
            alphas.append(alpha_for(n, p)[0])
    return samples, alphas


class VideoSegmenter(BaseEstimator):
    """Keyframe-accelerated video segmentation as an estimator.

    Parameters
    ----------
    mode : {'baseline', 'prop', 'inter'}
    keyframe_interval : int
    fusion : {'max', 'average', 'conv'}
        Fusion operator for ``inter``; ``conv`` is learned in ``fit``.
    model : estimator with ``features``/``task``, default ``ToyModel()``
        Cloned and fitted in ``fit`` unless it already has centroids.
    block_size, search_radius, workers :
        Motion estimation settings used when no motion fields are given.
    include_motion_cost : bool
        Count motion estimation time in reported timings.
    pipelined : bool
        Overlap next-keyframe feature extraction with the current interval.
    """

    def __init__(self, mode="inter", keyframe_interval=4, fusion="average", model=None,
                 block_size=16, search_radius=16, workers=1, include_motion_cost=False,
                 pipelined=False):
        self.mode = mode
        self.keyframe_interval = keyframe_interval
        self.fusion = fusion
        self.model = model
        self.block_size = block_size
        self.search_radius = search_radius
        self.workers = workers
        self.include_motion_cost = include_motion_cost
        self.pipelined = pipelined

    def _config(self) -> PipelineConfig:
        return PipelineConfig(self.keyframe_interval, self.fusion, self.mode,
                              search_radius=self.search_radius, block_size=self.block_size)

    def motion_fields(self, frames) -> tuple[list[MotionField], float]:
        t0 = time.perf_counter()
        fields = estimate_stream(frames, MatchParams(self.block_size, self.search_radius), self.workers)
        return fields, time.perf_counter() - t0

    def fit(self, X, y=None, motion_fields=None):
        """Fit the model's centroids (if needed) and the conv fusion layer (if used)."""
        config = self._config()
        frames = check_frames(X)
        model = ToyModel() if self.model is None else self.model
        if not _is_fitted(model):
            if y is None:
                raise ValueError("an unfitted model needs ground truth to fit")
            model = clone(model).fit(frames, y)
        self.model_ = model
        self.fusion_weights_ = FusionWeights("average")
        if config.fusion == "conv":
            n = config.keyframe_interval
            if n < 2 or len(frames) <= n:
                raise ValueError("conv fusion needs keyframe_interval >= 2 and more than n frames")
            if motion_fields is None:
                motion_fields, _ = self.motion_fields(frames)
            samples, alphas = conv_training_samples(frames, motion_fields, n, model)
            self.fusion_weights_ = fit_conv_fusion(samples, alphas)
        elif config.fusion != "average":
            self.fusion_weights_ = FusionWeights(config.fusion)
        return self

    def run(self, X, motion_fields=None) -> StreamResult:
        check_is_fitted(self, "model_")
        config = self._config()
        frames = check_frames(X)
        motion_seconds = 0.0
        if motion_fields is None and config.mode != "baseline" and config.keyframe_interval > 1:
            motion_fields, motion_seconds = self.motion_fields(frames)
        if config.mode == "inter":
            result = run_inter(frames, motion_fields, config, self.model_, self.fusion_weights_, self.pipelined)
        else:
            result = run_stream(frames, motion_fields, config, self.model_)
        result.motion_seconds = motion_seconds
        return result

    def predict(self, X, motion_fields=None) -> list[SegMap]:
        return self.run(X, motion_fields).segmentations

    def score(self, X, y, motion_fields=None) -> float:
        from .evaluate import miou

        preds = self.predict(X, motion_fields)
        return miou(preds, list(y), self.model_.num_classes)[1]


def _is_fitted(model) -> bool:
    try:
        check_is_fitted(model)
    except Exception:
        return False
    return True
