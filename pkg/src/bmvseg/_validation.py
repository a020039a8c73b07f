"""Input validation helpers shared by the estimators and pipeline functions."""
from __future__ import annotations

import numbers
from typing import Optional, Sequence

import numpy as np

from .types import FeatureMap, Frame, MotionField, SegMap


def check_positive_int(value, name: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def as_frame(obj, index: int = 0) -> Frame:
    if isinstance(obj, Frame):
        return obj
    return Frame(np.asarray(obj), index)


def check_frames(frames: Sequence, min_size: int = 1) -> list[Frame]:
    """Coerce ``frames`` to a list of Frames of one size with increasing indices.

    Raw ``H x W x 3`` uint8 arrays are accepted and indexed by position.
    """
    if isinstance(frames, (Frame, np.ndarray)) and getattr(frames, "ndim", 4) != 4:
        raise TypeError("expected a sequence of frames, got a single frame")
    out = [as_frame(f, i) for i, f in enumerate(frames)]
    if not out:
        raise ValueError("frame sequence is empty")
    shape = out[0].pixels.shape
    if shape[0] < min_size or shape[1] < min_size:
        raise ValueError(f"frames must be at least {min_size}x{min_size}, got {shape[1]}x{shape[0]}")
    for prev, f in zip(out, out[1:]):
        if f.pixels.shape != shape:
            raise ValueError(
                f"frame {f.index} is {f.width}x{f.height}, expected {shape[1]}x{shape[0]}")
        if f.index <= prev.index:
            raise ValueError(f"frame indices must be strictly increasing ({prev.index} then {f.index})")
    return out


def check_motion_fields(fields: Optional[Sequence[MotionField]], n_frames: int) -> list:
    """Check that a motion field is available for every non-first frame.

    ``fields[0]`` may be ``None`` since the first frame has no predecessor.
    """
    if fields is None:
        raise ValueError("motion fields are required")
    fields = list(fields)
    for i in range(1, n_frames):
        if i >= len(fields) or fields[i] is None:
            raise ValueError(f"missing motion field for frame {i}")
        if not isinstance(fields[i], MotionField):
            raise TypeError(f"motion field {i} is {type(fields[i]).__name__}, not MotionField")
    return fields


def check_same_shape(a: FeatureMap, b: FeatureMap, what: str = "feature maps"):
    if a.data.shape != b.data.shape:
        raise ValueError(f"{what} differ in shape: {a.data.shape} vs {b.data.shape}")


def check_segmaps(preds: Sequence[SegMap], gts: Sequence[SegMap]):
    preds, gts = list(preds), list(gts)
    if len(preds) != len(gts):
        raise ValueError(f"{len(preds)} predictions for {len(gts)} ground-truth maps")
    for i, (p, g) in enumerate(zip(preds, gts)):
        if p.labels.shape != g.labels.shape:
            raise ValueError(f"map {i}: prediction {p.labels.shape} vs ground truth {g.labels.shape}")
    return preds, gts
