"""Shared data model: frames, motion fields, feature maps and label maps.

Every container validates its shape at construction and stores read-only
array views, so instances can be shared freely between workers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

IGNORE_LABEL = 255
FUSION_KINDS = ("max", "average", "conv")
MODES = ("baseline", "prop", "inter")


def _frozen(arr: np.ndarray) -> np.ndarray:
    view = arr.view()
    view.flags.writeable = False
    return view


@dataclass(frozen=True, eq=False)
class Frame:
    """An H x W RGB raster at position ``index`` in its stream."""

    pixels: np.ndarray
    index: int = 0

    def __post_init__(self):
        pixels = np.asarray(self.pixels)
        if pixels.dtype != np.uint8:
            raise TypeError(f"frame pixels must be uint8, got {pixels.dtype}")
        if pixels.ndim != 3 or pixels.shape[2] != 3:
            raise ValueError(f"frame pixels must be H x W x 3, got shape {pixels.shape}")
        if pixels.shape[0] == 0 or pixels.shape[1] == 0:
            raise ValueError("frame must have non-zero width and height")
        if int(self.index) < 0:
            raise ValueError(f"frame index must be non-negative, got {self.index}")
        object.__setattr__(self, "pixels", _frozen(pixels))
        object.__setattr__(self, "index", int(self.index))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Frame):
            return NotImplemented
        return self.index == other.index and np.array_equal(self.pixels, other.pixels)


@dataclass(frozen=True, eq=False)
class MotionField:
    """Block motion vectors for one frame.

    ``vectors[by, bx] = (dx, dy)`` is the offset from block ``(by, bx)`` in
    the current frame to its best match in the previous frame.
    """

    vectors: np.ndarray
    block_size: int = 16

    def __post_init__(self):
        vectors = np.asarray(self.vectors, dtype=np.float64)
        if vectors.ndim != 3 or vectors.shape[2] != 2:
            raise ValueError(f"motion vectors must be grid_h x grid_w x 2, got {vectors.shape}")
        if vectors.shape[0] == 0 or vectors.shape[1] == 0:
            raise ValueError("motion field grid must be non-empty")
        if int(self.block_size) < 1:
            raise ValueError(f"block_size must be >= 1, got {self.block_size}")
        if not np.isfinite(vectors).all():
            raise ValueError("motion vectors must be finite")
        object.__setattr__(self, "vectors", _frozen(vectors))
        object.__setattr__(self, "block_size", int(self.block_size))

    @classmethod
    def zeros(cls, grid_h: int, grid_w: int, block_size: int = 16) -> "MotionField":
        return cls(np.zeros((grid_h, grid_w, 2)), block_size)

    @classmethod
    def for_frame(cls, width: int, height: int, block_size: int = 16) -> "MotionField":
        """All-zero field sized for a ``width`` x ``height`` frame."""
        return cls.zeros(math.ceil(height / block_size), math.ceil(width / block_size), block_size)

    @property
    def grid_h(self) -> int:
        return self.vectors.shape[0]

    @property
    def grid_w(self) -> int:
        return self.vectors.shape[1]

    def __eq__(self, other):
        if not isinstance(other, MotionField):
            return NotImplemented
        return self.block_size == other.block_size and np.array_equal(self.vectors, other.vectors)


@dataclass(frozen=True, eq=False)
class FeatureMap:
    """A channels x fh x fw real tensor at ``stride`` pixels per cell."""

    data: np.ndarray
    stride: int = 16

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3 or 0 in data.shape:
            raise ValueError(f"feature data must be a non-empty C x h x w array, got {data.shape}")
        if not np.isfinite(data).all():
            raise ValueError("feature values must be finite")
        if int(self.stride) < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")
        object.__setattr__(self, "data", _frozen(data))
        object.__setattr__(self, "stride", int(self.stride))

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def fh(self) -> int:
        return self.data.shape[1]

    @property
    def fw(self) -> int:
        return self.data.shape[2]

    def __eq__(self, other):
        if not isinstance(other, FeatureMap):
            return NotImplemented
        return self.stride == other.stride and np.array_equal(self.data, other.data)


@dataclass(frozen=True, eq=False)
class WarpField:
    """Per-cell (dx, dy) displacements in feature-cell units."""

    offsets: np.ndarray

    def __post_init__(self):
        offsets = np.asarray(self.offsets, dtype=np.float64)
        if offsets.ndim != 3 or offsets.shape[2] != 2 or 0 in offsets.shape:
            raise ValueError(f"warp offsets must be fh x fw x 2, got {offsets.shape}")
        if not np.isfinite(offsets).all():
            raise ValueError("warp offsets must be finite")
        object.__setattr__(self, "offsets", _frozen(offsets))

    @classmethod
    def zeros(cls, fh: int, fw: int) -> "WarpField":
        return cls(np.zeros((fh, fw, 2)))

    @property
    def fh(self) -> int:
        return self.offsets.shape[0]

    @property
    def fw(self) -> int:
        return self.offsets.shape[1]

    def __neg__(self) -> "WarpField":
        return WarpField(-self.offsets)

    def __eq__(self, other):
        if not isinstance(other, WarpField):
            return NotImplemented
        return np.array_equal(self.offsets, other.offsets)


@dataclass(frozen=True, eq=False)
class SegMap:
    """Per-pixel class labels; ``IGNORE_LABEL`` marks unlabeled pixels."""

    labels: np.ndarray
    num_classes: Optional[int] = None

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 2 or 0 in labels.shape:
            raise ValueError(f"labels must be a non-empty H x W array, got {labels.shape}")
        if labels.dtype != np.uint8:
            if labels.size and (labels.min() < 0 or labels.max() > IGNORE_LABEL):
                raise ValueError("labels must fit in 0..255")
            labels = labels.astype(np.uint8)
        if self.num_classes is not None:
            if not 1 <= self.num_classes <= IGNORE_LABEL:
                raise ValueError(f"num_classes must be in 1..{IGNORE_LABEL}, got {self.num_classes}")
            if int(labels.max()) >= self.num_classes:
                valid = labels[labels != IGNORE_LABEL]
                if valid.size and int(valid.max()) >= self.num_classes:
                    raise ValueError(
                        f"label {int(valid.max())} out of range for {self.num_classes} classes")
        object.__setattr__(self, "labels", _frozen(labels))

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    def __eq__(self, other):
        if not isinstance(other, SegMap):
            return NotImplemented
        return np.array_equal(self.labels, other.labels)


@dataclass(frozen=True)
class PipelineConfig:
    keyframe_interval: int = 4
    fusion: str = "average"
    mode: str = "inter"
    num_classes: Optional[int] = None
    search_radius: int = 16
    block_size: int = 16

    def __post_init__(self):
        if int(self.keyframe_interval) < 1:
            raise ValueError(f"keyframe_interval must be >= 1, got {self.keyframe_interval}")
        if self.fusion not in FUSION_KINDS:
            raise ValueError(f"fusion must be one of {FUSION_KINDS}, got {self.fusion!r}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if int(self.search_radius) < 0:
            raise ValueError(f"search_radius must be >= 0, got {self.search_radius}")
        if int(self.block_size) < 1:
            raise ValueError(f"block_size must be >= 1, got {self.block_size}")
