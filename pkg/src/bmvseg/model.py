"""Feature/task network interfaces and a deterministic desk-scale model.

The toy feature network describes every 16x16 cell with 12 numbers in
[0, 1]::

    0-2   mean R, G, B
    3-5   fraction of pixels with intensity in [0, 1/3), [1/3, 2/3), [2/3, 1]
    6-7   mean |d/dx|, |d/dy| of intensity (forward differences)
    8-11  mean intensity of the top-left, top-right, bottom-left and
          bottom-right quadrants

Because descriptors are computed per cell from local content, translating
the scene translates the descriptor grid, which is what makes motion-based
feature warping meaningful for this model.
"""
from __future__ import annotations

import math
from typing import Optional, Protocol, Sequence, runtime_checkable

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from ._validation import check_frames
from .types import IGNORE_LABEL, FeatureMap, Frame, SegMap

STRIDE = 16
TOY_CHANNELS = 12
HIST_CHANNELS = slice(3, 6)
_LUMA = np.array([0.299, 0.587, 0.114])


@runtime_checkable
class FeatureNetwork(Protocol):
    def features(self, frame: Frame) -> FeatureMap: ...


@runtime_checkable
class TaskNetwork(Protocol):
    def task(self, f: FeatureMap) -> SegMap: ...


def _cell_means(values: np.ndarray, step: int) -> np.ndarray:
    """Mean of ``values`` (H x W x ...) over ``step`` x ``step`` tiles."""
    h, w = values.shape[:2]
    ys = np.arange(0, h, step)
    xs = np.arange(0, w, step)
    sums = np.add.reduceat(np.add.reduceat(values, ys, axis=0), xs, axis=1)
    counts = np.outer(np.diff(np.append(ys, h)), np.diff(np.append(xs, w)))
    if sums.ndim == 3:
        counts = counts[..., None]
    return sums / counts


def toy_features(frame: Frame) -> FeatureMap:
    """12-channel per-cell descriptor of ``frame`` at stride 16."""
    if frame.height < STRIDE or frame.width < STRIDE:
        raise ValueError(f"frame must be at least {STRIDE}x{STRIDE}, got {frame.width}x{frame.height}")
    h, w = frame.height, frame.width
    rgb = frame.pixels / 255.0
    inten = rgb @ _LUMA

    gx = np.zeros((h, w))
    gy = np.zeros((h, w))
    np.abs(np.diff(inten, axis=1), out=gx[:, :-1])
    np.abs(np.diff(inten, axis=0), out=gy[:-1, :])

    per_pixel = np.empty((h, w, 8))
    per_pixel[..., 0:3] = rgb
    per_pixel[..., 3] = inten < 1 / 3
    per_pixel[..., 5] = inten >= 2 / 3
    per_pixel[..., 4] = 1.0 - per_pixel[..., 3] - per_pixel[..., 5]
    per_pixel[..., 6] = gx
    per_pixel[..., 7] = gy
    cells = _cell_means(per_pixel, STRIDE)

    # quadrant means; a quadrant missing from a clipped edge cell takes the cell mean
    half = STRIDE // 2
    sub = _cell_means(inten, half)
    cell_int = _cell_means(inten, STRIDE)
    fh, fw = cells.shape[:2]
    quads = np.empty((fh, fw, 4))
    for q, (qy, qx) in enumerate(((0, 0), (0, 1), (1, 0), (1, 1))):
        padded = np.array(cell_int)
        part = sub[qy::2, qx::2]
        padded[:part.shape[0], :part.shape[1]] = part
        quads[..., q] = padded
    data = np.concatenate([cells, quads], axis=2).transpose(2, 0, 1)
    return FeatureMap(data, STRIDE)


def project(data: np.ndarray) -> np.ndarray:
    """Rescale each cell so its histogram channels sum to one.

    Descriptors produced by :func:`toy_features`, and any convex blend of
    them, already satisfy this, so the projection leaves them unchanged. It
    undoes the uniform down-scaling introduced by weighted fusion.
    """
    mass = data[HIST_CHANNELS].sum(axis=0)
    if mass.min() > 1e-12:
        return data / mass
    return data / np.where(mass > 1e-12, mass, 1.0)


def toy_task(f: FeatureMap, model: "ToyModel", size: Optional[tuple[int, int]] = None) -> SegMap:
    """Nearest-centroid cell labels, upsampled to pixels by repetition.

    ``size`` is the output ``(height, width)``; it defaults to the full
    ``stride``-multiple extent of the map. Ties go to the lower class.
    """
    centroids = model.centroids_matrix()
    if f.channels != centroids.shape[1]:
        raise ValueError(f"feature map has {f.channels} channels, model expects {centroids.shape[1]}")
    data = project(f.data) if model.normalize else f.data
    # squared distance up to the per-cell constant ||x||^2
    dist = (centroids ** 2).sum(axis=1)[:, None] - 2.0 * centroids @ data.reshape(f.channels, -1)
    labels = np.argmin(dist, axis=0).astype(np.uint8).reshape(f.fh, f.fw)
    full = labels.repeat(f.stride, axis=0).repeat(f.stride, axis=1)
    if size is not None:
        full = full[:size[0], :size[1]]
    return SegMap(full, centroids.shape[0])


def cell_labels(gt: SegMap, stride: int = STRIDE) -> np.ndarray:
    """Majority non-ignore label per cell; cells with no valid pixel get IGNORE_LABEL."""
    h, w = gt.labels.shape
    fh, fw = math.ceil(h / stride), math.ceil(w / stride)
    padded = np.full((fh * stride, fw * stride), IGNORE_LABEL, dtype=np.uint8)
    padded[:h, :w] = gt.labels
    tiles = padded.reshape(fh, stride, fw, stride).transpose(0, 2, 1, 3).reshape(fh, fw, -1)
    present = np.unique(tiles[tiles != IGNORE_LABEL])
    out = np.full((fh, fw), IGNORE_LABEL, dtype=np.uint8)
    if present.size:
        counts = np.stack([(tiles == k).sum(axis=-1) for k in present], axis=-1)
        out = present[counts.argmax(axis=-1)].astype(np.uint8)
        out[counts.max(axis=-1) == 0] = IGNORE_LABEL
    return out


class ToyModel(BaseEstimator):
    """Nearest-centroid segmenter over :func:`toy_features` descriptors.

    Either pass ``centroids`` (``C x A``) directly or call ``fit`` with
    frames and ground-truth maps to learn one centroid per class as the mean
    descriptor of the cells that class dominates.

    Parameters
    ----------
    centroids : array-like of shape (n_classes, n_channels), optional
        Fixed class centroids; used when the model is not fitted.
    normalize : bool
        Apply :func:`project` before scoring. With ``False`` the projection
        is the identity.
    seed : int
        Seed for :meth:`random`.
    """

    def __init__(self, centroids=None, normalize=True, seed=0):
        self.centroids = centroids
        self.normalize = normalize
        self.seed = seed

    @classmethod
    def random(cls, num_classes: int, channels: int = TOY_CHANNELS, seed: int = 0, **kwargs) -> "ToyModel":
        rng = np.random.default_rng(seed)
        return cls(rng.random((num_classes, channels)), seed=seed, **kwargs)

    def centroids_matrix(self) -> np.ndarray:
        c = getattr(self, "centroids_", None)
        if c is None:
            if self.centroids is None:
                raise NotFittedError("ToyModel has no centroids; pass them or call fit()")
            c = np.asarray(self.centroids, dtype=np.float64)
            if c.ndim != 2 or not np.isfinite(c).all():
                raise ValueError("centroids must be a finite 2-D array")
        return c

    def __sklearn_is_fitted__(self):
        return getattr(self, "centroids_", None) is not None or self.centroids is not None

    @property
    def num_classes(self) -> int:
        return self.centroids_matrix().shape[0]

    def fit(self, X: Sequence[Frame], y: Sequence[SegMap], num_classes: Optional[int] = None):
        frames = check_frames(X, min_size=STRIDE)
        gts = list(y)
        if len(gts) != len(frames):
            raise ValueError(f"{len(frames)} frames but {len(gts)} ground-truth maps")
        feats, labels = [], []
        for frame, gt in zip(frames, gts):
            if (gt.height, gt.width) != (frame.height, frame.width):
                raise ValueError(f"ground truth for frame {frame.index} does not match its size")
            f = toy_features(frame).data
            feats.append(f.reshape(f.shape[0], -1).T)
            labels.append(cell_labels(gt).ravel())
        feats = np.vstack(feats)
        labels = np.concatenate(labels)
        valid = labels != IGNORE_LABEL
        if num_classes is None:
            num_classes = int(labels[valid].max()) + 1
        centroids = np.empty((num_classes, feats.shape[1]))
        for k in range(num_classes):
            rows = feats[valid & (labels == k)]
            if not len(rows):
                raise ValueError(f"class {k} dominates no training cell")
            centroids[k] = rows.mean(axis=0)
        if len(np.unique(centroids, axis=0)) != num_classes:
            raise ValueError("learned centroids are not distinct")
        self.centroids_ = centroids
        self.n_features_in_ = feats.shape[1]
        return self

    def features(self, frame: Frame) -> FeatureMap:
        return toy_features(frame)

    def task(self, f: FeatureMap, size: Optional[tuple[int, int]] = None) -> SegMap:
        return toy_task(f, self, size)

    def predict(self, X: Sequence[Frame]) -> list[SegMap]:
        """Per-frame segmentation, cropped to each frame's size."""
        return [self.task(self.features(f), (f.height, f.width)) for f in check_frames(X, STRIDE)]

    def score(self, X, y, num_classes: Optional[int] = None) -> float:
        from .evaluate import miou

        preds = self.predict(X)
        return miou(preds, list(y), num_classes or self.num_classes)[1]
