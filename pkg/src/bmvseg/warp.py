"""Bilinear feature warping and multi-step propagation chains."""
from __future__ import annotations

import functools
from typing import Sequence

import numpy as np

from .types import FeatureMap, WarpField


def bilinear_warp(f: FeatureMap, w: WarpField) -> FeatureMap:
    """Gather ``f`` at ``(x + dx, y + dy)`` for every cell, bilinearly.

    Sample coordinates are clamped to the map, so border cells repeat
    outward. All channels share the same field.
    """
    if (f.fh, f.fw) != (w.fh, w.fw):
        raise ValueError(f"warp field is {w.fh}x{w.fw} but feature map is {f.fh}x{f.fw}")
    fh, fw = f.fh, f.fw
    gy, gx = _grid(fh, fw)
    off = w.offsets.reshape(-1, 2)
    sx = np.minimum(np.maximum(gx + off[:, 0], 0), fw - 1)
    sy = np.minimum(np.maximum(gy + off[:, 1], 0), fh - 1)
    x0 = sx.astype(np.intp)
    y0 = sy.astype(np.intp)
    wx = sx - x0
    wy = sy - y0
    x1 = np.minimum(x0 + 1, fw - 1)
    r0 = y0 * fw
    r1 = np.minimum(y0 + 1, fh - 1) * fw

    d = f.data.reshape(f.channels, -1)
    top = d[:, r0 + x0] * (1 - wx) + d[:, r0 + x1] * wx
    bottom = d[:, r1 + x0] * (1 - wx) + d[:, r1 + x1] * wx
    out = top * (1 - wy) + bottom * wy
    return FeatureMap(out.reshape(f.data.shape), f.stride)


@functools.lru_cache(maxsize=32)
def _grid(fh: int, fw: int):
    """Flattened row and column coordinates of an fh x fw grid."""
    gy = np.repeat(np.arange(fh, dtype=np.float64), fw)
    gx = np.tile(np.arange(fw, dtype=np.float64), fh)
    gy.flags.writeable = False
    gx.flags.writeable = False
    return gy, gx


def warp_displacement(f: FeatureMap, g: WarpField) -> FeatureMap:
    """Move content of ``f`` along the displacement field ``g``.

    Cell ``q`` of the result reads ``f`` at ``q - g[q]``; with a block
    motion field this carries features from the matched frame into the
    frame the field was computed for when applied as ``-mv``.
    """
    return bilinear_warp(f, -g)


def propagate_chain(f: FeatureMap, steps: int, fields: Sequence[WarpField], warp=bilinear_warp) -> list[FeatureMap]:
    """Warp ``f`` one step at a time; element ``k`` has been warped ``k`` times."""
    if steps < 0:
        raise ValueError(f"steps must be non-negative, got {steps}")
    if len(fields) < steps:
        raise ValueError(f"{steps} steps requested but only {len(fields)} warp fields given")
    out = [f]
    for k in range(steps):
        out.append(warp(out[k], fields[k]))
    return out
