"""Command-line interface: ``bmvseg <command> ...``."""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import io
from .evaluate import (CAMVID_REFERENCE, component_times, intermediate_cost_reduction, measure, miou,
                       sweep, throughput_model)
from .fusion import FusionWeights
from .model import ToyModel
from .motion import MatchParams, estimate_stream
from .pipeline import VideoSegmenter
from .scene import SyntheticScene, fit_scene_model, named_scene, load_spec, make_scene, scene_motion_timed

FUSION_ALIASES = {"max": "max", "avg": "average", "average": "average", "conv": "conv"}


def parse_intervals(text: str) -> list[int]:
    """``"1..10"``, ``"2,4,8"`` or a mix such as ``"1..3,6"``."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    if not out or min(out) < 1:
        raise argparse.ArgumentTypeError(f"invalid interval list {text!r}")
    return out


def _fusion(name: str) -> str:
    try:
        return FUSION_ALIASES[name]
    except KeyError:
        raise argparse.ArgumentTypeError(f"unknown fusion {name!r}") from None


def _motion_fields(args, frames):
    if args.motion:
        sidecar = io.read_sidecar(args.motion)
        if sidecar.frame_count != len(frames):
            raise ValueError(f"sidecar holds {sidecar.frame_count} fields for {len(frames)} frames")
        return sidecar.fields, 0.0
    t0 = time.perf_counter()
    fields = estimate_stream(frames, MatchParams(search_radius=args.radius), args.workers)
    return fields, time.perf_counter() - t0


def cmd_estimate_motion(args):
    frames = io.load_frames(args.frames)
    fields = estimate_stream(frames, MatchParams(args.block_size, args.radius), args.workers)
    io.write_sidecar(args.output, fields)
    print(f"wrote {len(fields)} motion fields to {args.output}")


def cmd_fit(args):
    frames = io.load_frames(args.frames)
    gts = io.load_segmaps(args.gt, args.classes)
    model = ToyModel().fit(frames, gts, args.classes)
    seg = VideoSegmenter(mode="inter", keyframe_interval=args.interval, fusion=args.fusion,
                         model=model, search_radius=args.radius, workers=args.workers)
    fields = io.read_sidecar(args.motion).fields if args.motion else None
    seg.fit(frames, gts, motion_fields=fields)
    io.save_model(args.output, seg.model_, seg.fusion_weights_)
    print(f"wrote model with {seg.model_.num_classes} classes ({args.fusion} fusion) to {args.output}")


def cmd_run(args):
    frames = io.load_frames(args.frames)
    weights = None
    if args.model:
        model, weights = io.load_model(args.model)
    elif args.gt:
        model = ToyModel().fit(frames, io.load_segmaps(args.gt, args.classes), args.classes)
    else:
        raise ValueError("run needs --model or --gt to obtain class centroids")
    if args.fusion == "conv" and (weights is None or weights.kind != "conv"):
        raise ValueError("conv fusion needs a model file fitted with --fusion conv")
    seg = VideoSegmenter(mode=args.mode, keyframe_interval=args.interval, fusion=args.fusion,
                         model=model, search_radius=args.radius, workers=args.workers,
                         include_motion_cost=args.include_motion_cost)
    seg.model_ = model
    seg.fusion_weights_ = weights if args.fusion == "conv" else FusionWeights(args.fusion)
    fields, motion_seconds = (None, 0.0)
    if args.mode != "baseline" and args.interval > 1:
        fields, motion_seconds = _motion_fields(args, frames)
    result = seg.run(frames, fields)
    result.motion_seconds = motion_seconds
    io.save_segmaps(result.segmentations, args.output)
    seconds = result.total_seconds(args.include_motion_cost)
    print(f"{args.mode} n={args.interval}: {len(frames)} frames in {seconds:.3f} s "
          f"({len(frames) / seconds:.1f} fps), {result.feature_calls} feature passes")


def cmd_evaluate(args):
    preds = io.load_segmaps(args.segdir)
    gts = io.load_segmaps(args.gtdir, args.classes)
    per_class, mean = miou(preds, gts, args.classes)
    for c, v in enumerate(per_class):
        print(f"class {c}: " + ("absent" if v != v else f"{v:.6f}"))
    print(f"mean IoU: {mean:.6f}")


def _load_scene(source: str, seed):
    path = Path(source)
    if path.is_dir():
        frames = io.load_frames(path / "frames")
        spec = load_spec(path / "spec.json") if (path / "spec.json").is_file() else None
        classes = spec.num_classes if spec else None
        gts = io.load_segmaps(path / "gt", classes)
        scene = SyntheticScene(frames, gts, spec, seed if seed is not None else -1)
        fields = io.read_sidecar(path / "motion.bmvs").fields if (path / "motion.bmvs").is_file() else None
        return scene, False, fields
    if not path.exists():
        return named_scene(source, seed), True, None
    return make_scene(load_spec(source), seed), True, None


def _scene_model(scene, synthetic, args):
    if getattr(args, "model", None):
        return io.load_model(args.model)[0]
    if synthetic:
        return fit_scene_model(scene)
    classes = scene.spec.num_classes if scene.spec else None
    return ToyModel().fit(scene.frames, scene.ground_truth, classes)


def cmd_sweep(args):
    scene, synthetic, fields = _load_scene(args.scene, args.seed)
    model = _scene_model(scene, synthetic, args)
    motion_seconds = 0.0
    if fields is None:
        fields, motion_seconds = scene_motion_timed(scene, MatchParams(search_radius=args.radius), args.workers)
    reports = sweep(scene, args.schemes, args.intervals, model, args.fusion, fields,
                    args.repeats, args.include_motion_cost, motion_seconds)
    if args.output:
        io.write_csv(reports, args.output)
    else:
        io.write_csv(reports, sys.stdout)
    if args.svg:
        io.write_svg(reports, args.svg)
    if args.reference:
        ref = Path(args.reference)
        with open(ref, "w") as fh:
            fh.write("scheme,interval,miou_avg,miou_min,fps\n")
            for scheme, cols in CAMVID_REFERENCE.items():
                for k in range(10):
                    fh.write(f"{scheme},{k + 1},{cols['miou_avg'][k]},{cols['miou_min'][k]},{cols['fps'][k]}\n")


def cmd_bench(args):
    if args.interval < 2:
        raise ValueError("bench needs --interval >= 2 to time warping")
    scene, synthetic, fields = _load_scene(args.scene, args.seed)
    model = _scene_model(scene, synthetic, args)
    if fields is None:
        fields, motion = scene_motion_timed(scene, MatchParams(search_radius=args.radius), args.workers)
        print(f"motion estimation: {1e3 * motion / len(scene):.3f} ms/frame (excluded from fps)")
    n = args.interval
    base, base_fps = measure("baseline", scene.frames, fields, n, model, repeats=args.repeats)
    prop, prop_fps = measure("prop", scene.frames, fields, n, model, repeats=args.repeats)
    inter, inter_fps = measure("inter", scene.frames, fields, n, model, repeats=args.repeats)
    bt, pt, it = component_times(base), component_times(prop), component_times(inter)
    t_feat, t_task = bt["feature"], bt["task"]
    t_warp = pt.get("warp", 0.0)
    t_fuse = it.get("fusion", 0.0)
    t_flow = args.t_flow / 1e3 if args.t_flow else t_feat
    print(f"component ms: feature {1e3 * t_feat:.3f}  task {1e3 * t_task:.3f}  "
          f"warp {1e3 * t_warp:.3f}  fusion {1e3 * t_fuse:.3f}  flow(assumed) {1e3 * t_flow:.3f}")
    predicted = throughput_model(t_feat, t_warp, t_task, t_flow, n, t_fuse)
    measured = {"baseline": base_fps, "prop": prop_fps, "inter": inter_fps}
    print(f"{'scheme':<10} {'predicted fps':>14} {'measured fps':>13}")
    for scheme, fps in predicted.items():
        m = measured.get(scheme)
        print(f"{scheme:<10} {fps:>14.1f} {'-' if m is None else format(m, '.1f'):>13}")
    print(f"intermediate-frame cost cut without flow: {100 * intermediate_cost_reduction(t_flow, t_warp, t_task):.1f}%")
    print(f"measured speedup prop/baseline at n={n}: {prop_fps / base_fps:.2f}x")


def cmd_make_scene(args):
    spec = load_spec(args.spec)
    scene = make_scene(spec, args.seed)
    out = Path(args.output)
    io.save_frames(scene.frames, out / "frames", args.format)
    io.save_segmaps(scene.ground_truth, out / "gt")
    d = spec.to_dict()
    d["seed"] = scene.seed
    (out / "spec.json").write_text(json.dumps(d, indent=2) + "\n")
    if args.motion:
        fields = estimate_stream(scene.frames, MatchParams(search_radius=args.radius), args.workers)
        io.write_sidecar(out / "motion.bmvs", fields)
    print(f"wrote {len(scene)} frames ({spec.width}x{spec.height}, {spec.num_classes} classes) to {out}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bmvseg", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def motion_opts(sp):
        sp.add_argument("--radius", type=int, default=16, help="block search radius in pixels")
        sp.add_argument("--workers", type=int, default=1, help="threads for motion estimation")

    sp = sub.add_parser("estimate-motion", help="block motion fields for a frame directory")
    sp.add_argument("frames")
    sp.add_argument("-o", "--output", required=True)
    sp.add_argument("--block-size", type=int, default=16)
    motion_opts(sp)
    sp.set_defaults(func=cmd_estimate_motion)

    sp = sub.add_parser("fit", help="fit class centroids (and conv fusion) from labeled frames")
    sp.add_argument("frames")
    sp.add_argument("gt")
    sp.add_argument("-o", "--output", required=True)
    sp.add_argument("--classes", type=int)
    sp.add_argument("--fusion", type=_fusion, default="average")
    sp.add_argument("--interval", type=int, default=4)
    sp.add_argument("--motion")
    motion_opts(sp)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("run", help="segment a frame directory")
    sp.add_argument("frames")
    sp.add_argument("--mode", choices=("baseline", "prop", "inter"), required=True)
    sp.add_argument("--interval", type=int, default=4)
    sp.add_argument("--fusion", type=_fusion, default="average")
    sp.add_argument("--motion", help="BMVS sidecar; estimated from frames if omitted")
    sp.add_argument("--model", help="model file written by 'fit'")
    sp.add_argument("--gt", help="label directory to fit centroids from, instead of --model")
    sp.add_argument("--classes", type=int)
    sp.add_argument("--include-motion-cost", action="store_true")
    sp.add_argument("-o", "--output", required=True)
    motion_opts(sp)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("evaluate", help="mIoU of predicted label maps")
    sp.add_argument("segdir")
    sp.add_argument("gtdir")
    sp.add_argument("--classes", type=int, required=True)
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("sweep", help="accuracy/throughput over keyframe intervals, as CSV")
    sp.add_argument("--scene", default="translating", help="spec JSON, bundled name, or scene directory")
    sp.add_argument("--intervals", type=parse_intervals, default=parse_intervals("1..10"))
    sp.add_argument("--schemes", type=lambda s: s.split(","), default=["baseline", "prop", "inter"])
    sp.add_argument("--fusion", type=_fusion, default="average", choices=("max", "average"))
    sp.add_argument("--model")
    sp.add_argument("--repeats", type=int, default=3)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--include-motion-cost", action="store_true")
    sp.add_argument("-o", "--output", help="CSV path (default stdout)")
    sp.add_argument("--svg", help="also write an accuracy-vs-throughput plot")
    sp.add_argument("--reference", help="write full-scale published numbers to this CSV")
    motion_opts(sp)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("bench", help="measured component timings vs the throughput model")
    sp.add_argument("--scene", default="translating")
    sp.add_argument("--interval", type=int, default=10)
    sp.add_argument("--t-flow", type=float, help="assumed optical-flow cost in ms (default: feature cost)")
    sp.add_argument("--model")
    sp.add_argument("--repeats", type=int, default=3)
    sp.add_argument("--seed", type=int)
    motion_opts(sp)
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("make-scene", help="render a synthetic scene with ground truth")
    sp.add_argument("spec", help="spec JSON or bundled scene name")
    sp.add_argument("-o", "--output", required=True)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--format", choices=("ppm", "png"), default="ppm")
    sp.add_argument("--motion", action="store_true", help="also write motion.bmvs")
    motion_opts(sp)
    sp.set_defaults(func=cmd_make_scene)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (ValueError, OSError, RuntimeError, TypeError) as exc:
        print(f"bmvseg: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
