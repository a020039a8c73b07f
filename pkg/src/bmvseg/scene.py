"""Synthetic scenes of textured objects moving over a textured background.

Ground truth is exact by construction. Scene specs are plain dicts (or
JSON files) of the form::

    {"width": 192, "height": 128, "num_frames": 60, "seed": 0,
     "background": [{"class": 0, "y0": 0, "y1": 128, "color": [90, 110, 90]}],
     "objects": [{"class": 1, "shape": "rect", "size": [32, 32],
                  "position": [16, 48], "velocity": [8, 0],
                  "color": [200, 40, 40], "enter": 0, "exit": null}]}

``position`` is the top-left corner at the ``enter`` frame; later objects
are drawn over earlier ones.
"""
from __future__ import annotations

import functools
import json
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .model import ToyModel
from .motion import MatchParams, estimate_stream
from .types import IGNORE_LABEL, Frame, MotionField, SegMap

SHAPES = ("rect", "disk")
TEXTURE_AMPLITUDE = 40
TRAIN_SEED_OFFSET = 1000


@dataclass(frozen=True)
class ObjectSpec:
    cls: int
    size: tuple[int, int]
    position: tuple[float, float]
    velocity: tuple[float, float] = (0.0, 0.0)
    color: tuple[int, int, int] = (200, 40, 40)
    shape: str = "rect"
    enter: int = 0
    exit: Optional[int] = None

    def alive(self, t: int) -> bool:
        return t >= self.enter and (self.exit is None or t < self.exit)

    def corner(self, t: int) -> tuple[int, int]:
        dt = t - self.enter
        return (int(round(self.position[0] + self.velocity[0] * dt)),
                int(round(self.position[1] + self.velocity[1] * dt)))


@dataclass(frozen=True)
class BandSpec:
    cls: int
    y0: int
    y1: int
    color: tuple[int, int, int] = (90, 110, 90)


@dataclass(frozen=True)
class SceneSpec:
    width: int = 192
    height: int = 128
    num_frames: int = 60
    seed: int = 0
    background: tuple[BandSpec, ...] = ()
    objects: tuple[ObjectSpec, ...] = ()
    name: str = "scene"

    @property
    def num_classes(self) -> int:
        classes = [b.cls for b in self.background] + [o.cls for o in self.objects] + [0]
        return max(classes) + 1

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        try:
            bands = tuple(BandSpec(int(b["class"]), int(b["y0"]), int(b["y1"]),
                                   tuple(b.get("color", (90, 110, 90))))
                          for b in d.get("background", []))
            objects = tuple(ObjectSpec(
                cls=int(o["class"]), size=tuple(o["size"]), position=tuple(o["position"]),
                velocity=tuple(o.get("velocity", (0, 0))), color=tuple(o.get("color", (200, 40, 40))),
                shape=o.get("shape", "rect"), enter=int(o.get("enter", 0)),
                exit=None if o.get("exit") is None else int(o["exit"]))
                for o in d.get("objects", []))
            spec = cls(int(d.get("width", 192)), int(d.get("height", 128)), int(d.get("num_frames", 60)),
                       int(d.get("seed", 0)), bands, objects, d.get("name", "scene"))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"invalid scene spec: {exc}") from exc
        validate_spec(spec)
        return spec

    def to_dict(self) -> dict:
        return {
            "name": self.name, "width": self.width, "height": self.height,
            "num_frames": self.num_frames, "seed": self.seed,
            "background": [{"class": b.cls, "y0": b.y0, "y1": b.y1, "color": list(b.color)}
                           for b in self.background],
            "objects": [{"class": o.cls, "shape": o.shape, "size": list(o.size),
                         "position": list(o.position), "velocity": list(o.velocity),
                         "color": list(o.color), "enter": o.enter, "exit": o.exit}
                        for o in self.objects],
        }


def validate_spec(spec: SceneSpec) -> None:
    if spec.width < 16 or spec.height < 16:
        raise ValueError(f"scene must be at least 16x16, got {spec.width}x{spec.height}")
    if spec.num_frames < 1:
        raise ValueError("scene needs at least one frame")
    if spec.num_classes > IGNORE_LABEL:
        raise ValueError(f"class ids must be below {IGNORE_LABEL}")
    for b in spec.background:
        if b.cls < 0 or not 0 <= b.y0 < b.y1 <= spec.height:
            raise ValueError(f"invalid background band {b}")
    for i, o in enumerate(spec.objects):
        if o.cls < 0:
            raise ValueError(f"object {i}: negative class id")
        if o.shape not in SHAPES:
            raise ValueError(f"object {i}: unknown shape {o.shape!r}")
        if o.size[0] < 1 or o.size[1] < 1:
            raise ValueError(f"object {i}: size must be positive")
        if not 0 <= o.enter < spec.num_frames or (o.exit is not None and o.exit <= o.enter):
            raise ValueError(f"object {i}: invalid enter/exit times")
        if any(not 0 <= c <= 255 for c in o.color):
            raise ValueError(f"object {i}: color channels must be in 0..255")
        last = spec.num_frames if o.exit is None else min(o.exit, spec.num_frames)
        for t in (o.enter, last - 1):
            x, y = o.corner(t)
            if x + o.size[0] <= 0 or y + o.size[1] <= 0 or x >= spec.width or y >= spec.height:
                raise ValueError(f"object {i} leaves the frame at t={t}; shorten it with 'exit'")


@dataclass(eq=False)
class SyntheticScene:
    frames: list[Frame]
    ground_truth: list[SegMap]
    spec: SceneSpec
    seed: int

    def __post_init__(self):
        if len(self.frames) != len(self.ground_truth):
            raise ValueError("frames and ground truth must be aligned")

    @property
    def num_classes(self) -> int:
        return self.spec.num_classes

    def __len__(self):
        return len(self.frames)


def _texture(rng, h, w, color) -> np.ndarray:
    noise = rng.integers(-TEXTURE_AMPLITUDE, TEXTURE_AMPLITUDE + 1, size=(h, w, 1))
    return np.clip(np.asarray(color, dtype=np.int64) + noise, 0, 255).astype(np.uint8)


def _mask(o: ObjectSpec) -> np.ndarray:
    w, h = o.size
    if o.shape == "rect":
        return np.ones((h, w), dtype=bool)
    yy, xx = np.mgrid[0:h, 0:w]
    return ((xx + 0.5 - w / 2) / (w / 2)) ** 2 + ((yy + 0.5 - h / 2) / (h / 2)) ** 2 <= 1.0


def make_scene(spec: Union[SceneSpec, dict], seed: Optional[int] = None) -> SyntheticScene:
    """Render ``spec``; ``seed`` overrides the spec's texture seed."""
    if isinstance(spec, dict):
        spec = SceneSpec.from_dict(spec)
    validate_spec(spec)
    seed = spec.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    h, w = spec.height, spec.width

    background = _texture(rng, h, w, (90, 110, 90))
    bg_labels = np.zeros((h, w), dtype=np.uint8)
    for b in spec.background:
        background[b.y0:b.y1] = _texture(rng, b.y1 - b.y0, w, b.color)
        bg_labels[b.y0:b.y1] = b.cls
    sprites = [(_texture(rng, o.size[1], o.size[0], o.color), _mask(o)) for o in spec.objects]

    frames, gts = [], []
    for t in range(spec.num_frames):
        img = background.copy()
        lab = bg_labels.copy()
        for o, (tex, mask) in zip(spec.objects, sprites):
            if not o.alive(t):
                continue
            x, y = o.corner(t)
            x0, y0 = max(x, 0), max(y, 0)
            x1, y1 = min(x + o.size[0], w), min(y + o.size[1], h)
            if x1 <= x0 or y1 <= y0:
                continue
            m = mask[y0 - y:y1 - y, x0 - x:x1 - x]
            img[y0:y1, x0:x1][m] = tex[y0 - y:y1 - y, x0 - x:x1 - x][m]
            lab[y0:y1, x0:x1][m] = o.cls
        frames.append(Frame(img, t))
        gts.append(SegMap(lab, spec.num_classes))
    return SyntheticScene(frames, gts, spec, seed)


def load_spec(source: Union[str, Path, dict, SceneSpec]) -> SceneSpec:
    """Scene spec from a dict, a JSON file, or the name of a bundled spec."""
    if isinstance(source, SceneSpec):
        return source
    if isinstance(source, dict):
        return SceneSpec.from_dict(source)
    path = Path(source)
    if path.is_file():
        return SceneSpec.from_dict(json.loads(path.read_text()))
    bundled = resources.files("bmvseg") / "data" / f"{source}.json"
    if bundled.is_file():
        return SceneSpec.from_dict(json.loads(bundled.read_text()))
    raise ValueError(f"no scene spec file or bundled scene named {source!r}")


def bundled_scene(seed: Optional[int] = None) -> SyntheticScene:
    """The 60-frame translating benchmark with a mid-scene object entry."""
    return named_scene("translating", seed)


@functools.lru_cache(maxsize=8)
def named_scene(name: str, seed: Optional[int] = None) -> SyntheticScene:
    """A bundled scene rendered once per (name, seed) and shared afterwards."""
    return make_scene(load_spec(name), seed)


def fit_scene_model(scene: SyntheticScene, seed_offset: int = TRAIN_SEED_OFFSET) -> ToyModel:
    """ToyModel fitted on a re-rendering of ``scene``'s spec with fresh textures.

    Same layout and motion, different texture noise, so the model is never
    scored on the pixels it was fitted on.
    """
    train = make_scene(scene.spec, scene.seed + seed_offset)
    return ToyModel().fit(train.frames, train.ground_truth, scene.spec.num_classes)


_MOTION_CACHE: dict = {}


def scene_motion(scene: SyntheticScene, params: MatchParams = MatchParams(), workers: int = 1) -> list[MotionField]:
    """Block motion fields for a scene, memoised per scene object."""
    return scene_motion_timed(scene, params, workers)[0]


def scene_motion_timed(scene: SyntheticScene, params: MatchParams = MatchParams(),
                       workers: int = 1) -> tuple[list[MotionField], float]:
    """Like :func:`scene_motion`, plus the seconds the estimation took when it ran."""
    key = (id(scene), params)
    hit = _MOTION_CACHE.get(key)
    if hit is not None and hit[0] is scene:
        return hit[1], hit[2]
    t0 = time.perf_counter()
    fields = estimate_stream(scene.frames, params, workers)
    elapsed = time.perf_counter() - t0
    _MOTION_CACHE[key] = (scene, fields, elapsed)
    return fields, elapsed
