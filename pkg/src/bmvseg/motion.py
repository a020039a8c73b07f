"""Block motion estimation and conversion of motion fields to feature-grid warps."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_frames, check_positive_int
from .types import Frame, MotionField, WarpField

METRICS = ("mse",)

# Integer luma weights (x1000) keep block errors exact, so ties are decided
# identically regardless of summation order.
_LUMA_WEIGHTS = np.array([299, 587, 114], dtype=np.int64)


@dataclass(frozen=True)
class MatchParams:
    block_size: int = 16
    search_radius: int = 16
    metric: str = "mse"

    def __post_init__(self):
        if int(self.block_size) < 1:
            raise ValueError(f"block_size must be >= 1, got {self.block_size}")
        if int(self.search_radius) < 0:
            raise ValueError(f"search_radius must be >= 0, got {self.search_radius}")
        if self.metric not in METRICS:
            raise ValueError(f"unsupported metric {self.metric!r}; expected one of {METRICS}")


def luma(frame: Frame) -> np.ndarray:
    """Grayscale intensity scaled by 1000, as exact int64."""
    return frame.pixels.astype(np.int64) @ _LUMA_WEIGHTS


def candidate_offsets(radius: int) -> list[tuple[int, int]]:
    """All (dx, dy) in the search window, in tie-break priority order.

    Smaller L1 displacement first, then smaller dy, then smaller dx.
    """
    r = range(-radius, radius + 1)
    return sorted(((dx, dy) for dy in r for dx in r), key=lambda o: (abs(o[0]) + abs(o[1]), o[1], o[0]))


def _block_edges(length: int, block_size: int) -> tuple[np.ndarray, np.ndarray]:
    starts = np.arange(0, length, block_size)
    ends = np.minimum(starts + block_size, length)
    return starts, ends


def _search_rows(cur, padded, radius, block_size, row_blocks, offsets):
    """Exhaustive search for the block rows in ``row_blocks`` (a slice)."""
    h, w = cur.shape
    ys, ye = _block_edges(h, block_size)
    xs, xe = _block_edges(w, block_size)
    ys, ye = ys[row_blocks], ye[row_blocks]
    y0, y1 = int(ys[0]), int(ye[-1])
    cur_rows = cur[y0:y1]
    row_starts = ys - y0

    best = np.full((len(ys), len(xs)), np.iinfo(np.int64).max, dtype=np.int64)
    best_dx = np.zeros(best.shape, dtype=np.int64)
    best_dy = np.zeros(best.shape, dtype=np.int64)
    for dx, dy in offsets:
        row_ok = (ys + dy >= 0) & (ye + dy <= h)
        col_ok = (xs + dx >= 0) & (xe + dx <= w)
        if not row_ok.any() or not col_ok.any():
            continue
        shifted = padded[radius + y0 + dy: radius + y1 + dy, radius + dx: radius + dx + w]
        sq = (cur_rows - shifted) ** 2
        sse = np.add.reduceat(np.add.reduceat(sq, row_starts, axis=0), xs, axis=1)
        better = (sse < best) & row_ok[:, None] & col_ok[None, :]
        best[better] = sse[better]
        best_dx[better] = dx
        best_dy[better] = dy
    return best_dx, best_dy


def estimate_motion(prev: Frame, curr: Frame, params: MatchParams = MatchParams(),
                    workers: int = 1) -> MotionField:
    """Exhaustive block matching of ``curr`` against ``prev``.

    Each block of ``curr`` is compared, over its actual extent, with every
    equally sized block of ``prev`` displaced by at most ``search_radius``
    pixels and lying fully inside the frame. The lowest mean squared error
    wins; ties go to the earliest candidate of :func:`candidate_offsets`.
    """
    if prev.pixels.shape != curr.pixels.shape:
        raise ValueError(
            f"frame dimensions differ: {prev.width}x{prev.height} vs {curr.width}x{curr.height}")
    bs, radius = params.block_size, params.search_radius
    cur = luma(curr)
    padded = np.pad(luma(prev), radius)
    offsets = candidate_offsets(radius)
    grid_h = math.ceil(cur.shape[0] / bs)

    workers = max(1, min(int(workers), grid_h))
    bounds = np.linspace(0, grid_h, workers + 1).astype(int)
    bands = [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    if len(bands) == 1:
        parts = [_search_rows(cur, padded, radius, bs, bands[0], offsets)]
    else:
        with ThreadPoolExecutor(max_workers=len(bands)) as pool:
            parts = list(pool.map(lambda band: _search_rows(cur, padded, radius, bs, band, offsets), bands))
    dx = np.concatenate([p[0] for p in parts], axis=0)
    dy = np.concatenate([p[1] for p in parts], axis=0)
    return MotionField(np.stack([dx, dy], axis=-1).astype(np.float64), bs)


def negate(mv: MotionField) -> MotionField:
    return MotionField(-mv.vectors, mv.block_size)


def to_warp_field(mv: MotionField, stride: Optional[int] = None,
                  shape: Optional[tuple[int, int]] = None) -> WarpField:
    """Resample a block motion field onto a feature grid, in cell units.

    Each cell takes the vector of the block covering its center pixel,
    divided by ``stride``. ``shape`` defaults to the grid that covers the
    same pixel extent as ``mv``.
    """
    stride = mv.block_size if stride is None else stride
    if stride <= 0:
        raise ValueError(f"stride must be positive, got {stride}")
    if shape is None:
        shape = (math.ceil(mv.grid_h * mv.block_size / stride),
                 math.ceil(mv.grid_w * mv.block_size / stride))
    fh, fw = shape
    if stride == mv.block_size and (fh, fw) == (mv.grid_h, mv.grid_w):
        return WarpField(mv.vectors / stride)
    cy = np.minimum(((np.arange(fh) + 0.5) * stride // mv.block_size).astype(int), mv.grid_h - 1)
    cx = np.minimum(((np.arange(fw) + 0.5) * stride // mv.block_size).astype(int), mv.grid_w - 1)
    return WarpField(mv.vectors[cy[:, None], cx[None, :]] / stride)


def estimate_stream(frames: Sequence[Frame], params: MatchParams = MatchParams(),
                    workers: int = 1) -> list[MotionField]:
    """Motion fields for a whole stream; frame 0 gets the all-zero field."""
    frames = check_frames(frames)
    first = frames[0]
    fields = [MotionField.for_frame(first.width, first.height, params.block_size)]
    for prev, curr in zip(frames[:-1], frames[1:]):
        fields.append(estimate_motion(prev, curr, params, workers))
    return fields


class BlockMotionEstimator(TransformerMixin, BaseEstimator):
    """Transformer mapping a frame sequence to its block motion fields.

    Stateless: ``fit`` only validates parameters.

    Parameters
    ----------
    block_size : int
        Block edge in pixels.
    search_radius : int
        Maximum displacement searched along each axis.
    workers : int
        Threads used per frame pair; output does not depend on it.
    """

    def __init__(self, block_size=16, search_radius=16, workers=1):
        self.block_size = block_size
        self.search_radius = search_radius
        self.workers = workers

    def _params(self) -> MatchParams:
        return MatchParams(self.block_size, self.search_radius)

    def fit(self, X=None, y=None):
        self._params()
        check_positive_int(self.workers, "workers")
        return self

    def __sklearn_is_fitted__(self):
        return True

    def transform(self, X):
        return estimate_stream(X, self._params(), self.workers)
