"""Distance weighting and fusion of forward- and backward-warped features."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_same_shape
from .types import FUSION_KINDS, FeatureMap


class RankDeficientWarning(UserWarning):
    """The conv-fusion regression had fewer independent rows than unknowns."""


@dataclass(frozen=True, eq=False)
class FusionWeights:
    """Fusion operator choice, plus the 1x1 mixing layer for ``conv``.

    ``kernel`` has shape ``(2C, C)``: row ``k`` weights stacked input channel
    ``k`` (forward maps first), column ``c`` produces output channel ``c``.
    """

    kind: str = "average"
    kernel: Optional[np.ndarray] = None
    bias: Optional[np.ndarray] = None
    residual_mse: Optional[float] = None
    rank_deficient: bool = False

    def __post_init__(self):
        if self.kind not in FUSION_KINDS:
            raise ValueError(f"fusion kind must be one of {FUSION_KINDS}, got {self.kind!r}")
        if self.kind != "conv":
            if self.kernel is not None or self.bias is not None:
                raise ValueError(f"{self.kind} fusion takes no kernel")
            return
        if self.kernel is None:
            raise ValueError("conv fusion requires a kernel")
        kernel = np.asarray(self.kernel, dtype=np.float64)
        if kernel.ndim != 2 or kernel.shape[0] != 2 * kernel.shape[1] or kernel.shape[1] == 0:
            raise ValueError(f"conv kernel must have shape (2C, C), got {kernel.shape}")
        c = kernel.shape[1]
        bias = np.zeros(c) if self.bias is None else np.asarray(self.bias, dtype=np.float64)
        if bias.shape != (c,):
            raise ValueError(f"conv bias must have shape ({c},), got {bias.shape}")
        if not (np.isfinite(kernel).all() and np.isfinite(bias).all()):
            raise ValueError("conv weights must be finite")
        object.__setattr__(self, "kernel", kernel)
        object.__setattr__(self, "bias", bias)

    @property
    def channels(self) -> Optional[int]:
        return None if self.kernel is None else self.kernel.shape[1]

    @classmethod
    def averaging(cls, channels: int) -> "FusionWeights":
        """Conv weights that reproduce average fusion exactly."""
        eye = np.eye(channels)
        return cls("conv", np.vstack([eye, eye]) * 0.5, np.zeros(channels))


def alpha_for(n: int, p: int) -> tuple[float, float]:
    """Weights for the forward and backward maps at offset ``p`` of interval ``n``.

    Features warped farther from their keyframe get the smaller weight.
    """
    if not 1 <= p <= n - 1:
        raise ValueError(f"offset p={p} outside 1..{n - 1} for keyframe interval {n}")
    return (n - p) / n, p / n


def _stack(ff: np.ndarray, fb: np.ndarray, alpha: float) -> np.ndarray:
    """Weighted inputs as a (pixels, 2C) design matrix."""
    c = ff.shape[0]
    return np.concatenate([alpha * ff, (1 - alpha) * fb], axis=0).reshape(2 * c, -1).T


def fuse(ff: FeatureMap, fb: FeatureMap, alpha: float, weights: Union[FusionWeights, str] = "average") -> FeatureMap:
    """Merge ``alpha * ff`` with ``(1 - alpha) * fb``.

    ``max`` and ``average`` work per element; ``conv`` stacks both maps along
    channels and applies the learned 1x1 layer.
    """
    if isinstance(weights, str):
        weights = FusionWeights(weights)
    check_same_shape(ff, fb)
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    a = alpha * ff.data
    b = (1 - alpha) * fb.data
    if weights.kind == "max":
        out = np.maximum(a, b)
    elif weights.kind == "average":
        out = (a + b) / 2
    else:
        c = ff.channels
        if weights.channels != c:
            raise ValueError(f"conv kernel expects {weights.channels} channels, maps have {c}")
        stacked = np.concatenate([a, b], axis=0)
        out = np.einsum("kc,khw->chw", weights.kernel, stacked) + weights.bias[:, None, None]
    return FeatureMap(out, ff.stride)


def _sample_alpha(alpha, i):
    if np.ndim(alpha) == 0:
        return float(alpha)
    return float(alpha[i])


def fit_conv_fusion(samples: Iterable[Sequence[FeatureMap]],
                    alpha: Union[float, Sequence[float]] = 0.5) -> FusionWeights:
    """Least-squares fit of the 1x1 conv fusion layer.

    ``samples`` holds ``(ff, fb, target)`` triples; ``alpha`` is one weight
    for all samples or one per sample. Every pixel of every sample is a
    regression row over the ``2C`` weighted inputs plus an intercept, solved
    jointly for all output channels. Rank-deficient systems get the
    minimum-norm solution and a :class:`RankDeficientWarning`.
    """
    rows, targets = [], []
    shape = None
    for i, (ff, fb, target) in enumerate(samples):
        check_same_shape(ff, fb)
        check_same_shape(ff, target, "fusion input and target")
        if shape is not None and ff.data.shape != shape:
            raise ValueError(f"sample {i} has shape {ff.data.shape}, expected {shape}")
        shape = ff.data.shape
        rows.append(_stack(ff.data, fb.data, _sample_alpha(alpha, i)))
        targets.append(target.data.reshape(shape[0], -1).T)
    if not rows:
        raise ValueError("fit_conv_fusion needs at least one sample")
    c = shape[0]
    x = np.vstack(rows)
    x = np.hstack([x, np.ones((x.shape[0], 1))])
    y = np.vstack(targets)
    coef, _, rank, _ = np.linalg.lstsq(x, y, rcond=None)
    deficient = rank < x.shape[1]
    if deficient:
        warnings.warn(
            f"conv fusion system has rank {rank} < {x.shape[1]} unknowns; using minimum-norm solution",
            RankDeficientWarning, stacklevel=2)
    residual = float(np.mean((x @ coef - y) ** 2))
    return FusionWeights("conv", coef[:2 * c], coef[2 * c], residual, bool(deficient))


class FeatureFuser(BaseEstimator):
    """Estimator wrapper around :func:`fuse` / :func:`fit_conv_fusion`.

    ``max`` and ``average`` need no fitting; ``conv`` learns its layer in
    ``fit`` from ``(ff, fb, target)`` samples.
    """

    def __init__(self, kind="average"):
        self.kind = kind

    def fit(self, samples=None, alpha=0.5):
        if self.kind == "conv":
            if samples is None:
                raise ValueError("conv fusion needs training samples")
            self.weights_ = fit_conv_fusion(samples, alpha)
        else:
            self.weights_ = FusionWeights(self.kind)
        return self

    def transform(self, ff: FeatureMap, fb: FeatureMap, alpha: float) -> FeatureMap:
        check_is_fitted(self)
        return fuse(ff, fb, alpha, self.weights_)
