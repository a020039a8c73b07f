"""Serialization: frame and label directories, BMVS motion sidecars, model files, reports.

BMVS sidecar layout (little-endian)::

    offset  size  field
    0       4     magic b"BMVS"
    4       2     version (uint16, currently 1)
    6       2     grid_w (uint16)
    8       2     grid_h (uint16)
    10      2     block_size (uint16)
    12      4     frame_count (uint32)
    16      ...   per frame, grid_h * grid_w (dx, dy) int16 pairs in raster order

Frame 0 has no predecessor; its field is stored as all zeros.
"""
from __future__ import annotations

import csv
import io as _io
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence, TextIO, Union

import numpy as np
from PIL import Image

from .fusion import FusionWeights
from .model import ToyModel
from .types import Frame, MotionField, SegMap

MAGIC = b"BMVS"
VERSION = 1
_HEADER = struct.Struct("<4sHHHHI")
FRAME_SUFFIXES = (".ppm", ".pnm", ".png")
LABEL_SUFFIXES = (".pgm", ".png")

PathLike = Union[str, Path]


class SidecarError(ValueError):
    """Malformed BMVS data; ``offset`` is the byte position of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


@dataclass
class MotionSidecar:
    grid_w: int
    grid_h: int
    block_size: int
    fields: list[MotionField] = field(default_factory=list)
    version: int = VERSION

    @property
    def frame_count(self) -> int:
        return len(self.fields)


def _listing(directory: PathLike, suffixes) -> list[Path]:
    d = Path(directory)
    if not d.is_dir():
        raise FileNotFoundError(f"not a directory: {d}")
    files = sorted(p for p in d.iterdir() if p.suffix.lower() in suffixes)
    if not files:
        raise ValueError(f"no {'/'.join(suffixes)} files in {d}")
    return files


def load_frames(directory: PathLike) -> list[Frame]:
    """Frames from image files, ordered by filename and indexed from 0."""
    frames = []
    for i, path in enumerate(_listing(directory, FRAME_SUFFIXES)):
        try:
            with Image.open(path) as im:
                pixels = np.asarray(im.convert("RGB"))
        except Exception as exc:
            raise ValueError(f"cannot read frame {path}: {exc}") from exc
        if frames and pixels.shape != frames[0].pixels.shape:
            raise ValueError(f"{path} is {pixels.shape[1]}x{pixels.shape[0]}, "
                             f"expected {frames[0].width}x{frames[0].height}")
        frames.append(Frame(pixels, i))
    return frames


def save_frames(frames: Iterable[Frame], directory: PathLike, fmt: str = "ppm") -> list[Path]:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, frame in enumerate(frames):
        path = d / f"frame_{i:05d}.{fmt}"
        Image.fromarray(np.ascontiguousarray(frame.pixels), "RGB").save(path)
        paths.append(path)
    return paths


def load_segmaps(directory: PathLike, num_classes: Optional[int] = None) -> list[SegMap]:
    """Label maps from 8-bit grayscale images; pixel value 255 means ignore."""
    maps = []
    for path in _listing(directory, LABEL_SUFFIXES):
        try:
            with Image.open(path) as im:
                if im.mode not in ("L", "P"):
                    raise ValueError(f"expected an 8-bit single-channel image, got mode {im.mode}")
                labels = np.asarray(im if im.mode == "L" else im.convert("L"))
            maps.append(SegMap(labels, num_classes))
        except Exception as exc:
            raise ValueError(f"cannot read label map {path}: {exc}") from exc
    return maps


def save_segmaps(maps: Iterable[SegMap], directory: PathLike, fmt: str = "png") -> list[Path]:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, seg in enumerate(maps):
        path = d / f"seg_{i:05d}.{fmt}"
        Image.fromarray(np.ascontiguousarray(seg.labels), "L").save(path)
        paths.append(path)
    return paths


def encode_sidecar(fields: Sequence[Optional[MotionField]], grid_w: Optional[int] = None,
                   grid_h: Optional[int] = None, block_size: Optional[int] = None) -> bytes:
    """BMVS bytes for a stream's motion fields.

    ``fields[0]`` may be ``None``; it is written as zeros. Grid dimensions
    are taken from the fields unless the stream is empty.
    """
    fields = list(fields)
    ref = next((f for f in fields if f is not None), None)
    if ref is not None:
        grid_w, grid_h, block_size = ref.grid_w, ref.grid_h, ref.block_size
    if grid_w is None or grid_h is None or block_size is None:
        raise ValueError("grid_w, grid_h and block_size are required for an empty sidecar")
    chunks = [_HEADER.pack(MAGIC, VERSION, grid_w, grid_h, block_size, len(fields))]
    for i, f in enumerate(fields):
        if f is None or i == 0:
            if f is not None and np.any(f.vectors):
                raise ValueError("frame 0 must carry an all-zero motion field")
            chunks.append(bytes(grid_w * grid_h * 4))
            continue
        if (f.grid_w, f.grid_h, f.block_size) != (grid_w, grid_h, block_size):
            raise ValueError(f"motion field {i} does not match the sidecar grid")
        v = f.vectors
        if not np.array_equal(v, np.round(v)):
            raise ValueError(f"motion field {i} has non-integer vectors; BMVS stores int16")
        if np.abs(v).max(initial=0) > 32767:
            raise ValueError(f"motion field {i} exceeds the int16 range")
        chunks.append(v.astype("<i2").tobytes())
    return b"".join(chunks)


def decode_sidecar(data: bytes) -> MotionSidecar:
    if len(data) < _HEADER.size:
        raise SidecarError(f"truncated header: {len(data)} of {_HEADER.size} bytes", len(data))
    magic, version, grid_w, grid_h, block_size, count = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise SidecarError(f"bad magic {magic!r}, expected {MAGIC!r}", 0)
    if version != VERSION:
        raise SidecarError(f"unsupported version {version}", 4)
    if grid_w == 0 or grid_h == 0 or block_size == 0:
        raise SidecarError("grid dimensions and block size must be non-zero", 6)
    per_frame = grid_w * grid_h * 4
    expected = _HEADER.size + count * per_frame
    if len(data) < expected:
        raise SidecarError(
            f"truncated payload: {count} frames need {expected} bytes, got {len(data)}", len(data))
    if len(data) > expected:
        raise SidecarError(f"{len(data) - expected} trailing bytes after payload", expected)
    payload = np.frombuffer(data, dtype="<i2", offset=_HEADER.size).reshape(count, grid_h, grid_w, 2)
    fields = [MotionField(payload[i].astype(np.float64), block_size) for i in range(count)]
    return MotionSidecar(grid_w, grid_h, block_size, fields, version)


def write_sidecar(path: PathLike, fields: Sequence[Optional[MotionField]], **grid) -> None:
    Path(path).write_bytes(encode_sidecar(fields, **grid))


def read_sidecar(path: PathLike) -> MotionSidecar:
    return decode_sidecar(Path(path).read_bytes())


def save_model(path: PathLike, model: ToyModel, fusion: Optional[FusionWeights] = None) -> None:
    """Store centroids and optional fusion weights in an ``.npz`` file."""
    arrays = {"centroids": model.centroids_matrix(), "normalize": np.array(bool(model.normalize))}
    if fusion is not None:
        arrays["fusion_kind"] = np.array(fusion.kind)
        if fusion.kind == "conv":
            arrays["fusion_kernel"] = fusion.kernel
            arrays["fusion_bias"] = fusion.bias
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_model(path: PathLike) -> tuple[ToyModel, Optional[FusionWeights]]:
    try:
        with np.load(path, allow_pickle=False) as z:
            model = ToyModel(centroids=z["centroids"].copy(), normalize=bool(z["normalize"]))
            fusion = None
            if "fusion_kind" in z:
                kind = str(z["fusion_kind"])
                if kind == "conv":
                    fusion = FusionWeights("conv", z["fusion_kernel"].copy(), z["fusion_bias"].copy())
                else:
                    fusion = FusionWeights(kind)
    except (OSError, KeyError, ValueError) as exc:
        raise ValueError(f"cannot read model file {path}: {exc}") from exc
    return model, fusion


def report_rows(reports) -> tuple[list[str], list[list]]:
    width = max((len(r.per_offset_miou) for r in reports), default=0)
    header = ["scheme", "interval", "miou_avg", "miou_min", "fps"] + [f"offset_{k}" for k in range(width)]
    rows = []
    for r in reports:
        offsets = [f"{v:.4f}" for v in r.per_offset_miou] + [""] * (width - len(r.per_offset_miou))
        rows.append([r.scheme, r.keyframe_interval, f"{r.miou_avg:.4f}", f"{r.miou_min:.4f}",
                     f"{r.throughput:.2f}"] + offsets)
    return header, rows


def write_csv(reports, out: Union[PathLike, TextIO]) -> None:
    header, rows = report_rows(reports)
    if isinstance(out, (str, Path)):
        with open(out, "w", newline="") as fh:
            _write_rows(fh, header, rows)
    else:
        _write_rows(out, header, rows)


def _write_rows(fh, header, rows):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)


def read_csv(source: Union[PathLike, TextIO]) -> list[dict]:
    if isinstance(source, (str, Path)):
        with open(source, newline="") as fh:
            return list(csv.DictReader(fh))
    return list(csv.DictReader(source))


def csv_text(reports) -> str:
    buf = _io.StringIO()
    write_csv(reports, buf)
    return buf.getvalue()


def write_svg(reports, path: PathLike, metric: str = "miou_avg") -> None:
    """Accuracy-vs-throughput curve per scheme (needs matplotlib)."""
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError as exc:
        raise RuntimeError("SVG plots need matplotlib (pip install 'artifact[plot]')") from exc
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for scheme in dict.fromkeys(r.scheme for r in reports):
        rs = sorted((r for r in reports if r.scheme == scheme), key=lambda r: r.keyframe_interval)
        ax.plot([r.throughput for r in rs], [getattr(r, metric) for r in rs], marker="o", label=scheme)
    ax.set_xlabel("throughput (fps)")
    ax.set_ylabel(f"mIoU, {metric.split('_')[1]} (%)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
