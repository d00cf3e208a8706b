"""Command line interface: synth, preprocess, train, detect, eval, experiment."""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

from .forest import ForestConfig, dump_descriptors, load_model, save_model
from .metrics import detection_report
from .mrf import save_probability_volume
from .pipeline import (
    FUSION_MODES,
    PipelineConfig,
    detect,
    preprocess_video,
    run_experiment,
    train_pipeline,
)
from .synth import generate_dataset
from .video_io import (
    load_frame_sequence,
    load_mask_sequence,
    save_frame_sequence,
    save_mask_sequence,
    write_pgm,
)

_PIPELINE_FIELDS = {f.name for f in dataclasses.fields(PipelineConfig)} - {"forest"}
_FOREST_FIELDS = {f.name for f in dataclasses.fields(ForestConfig)}


def _build_config(args) -> PipelineConfig:
    """PipelineConfig from an optional JSON config file plus CLI overrides."""
    data: dict = {}
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ValueError(f"config file {args.config} must hold a JSON object")
    forest_data = data.pop("forest", {})
    unknown = set(data) - _PIPELINE_FIELDS
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    unknown = set(forest_data) - _FOREST_FIELDS
    if unknown:
        raise ValueError(f"unknown forest config keys: {sorted(unknown)}")
    if getattr(args, "seed", None) is not None:
        data["seed"] = args.seed
    if getattr(args, "lam", None) is not None:
        data["lam"] = args.lam
    if getattr(args, "mode", None) is not None:
        data["fusion"] = args.mode
    if getattr(args, "direct", False):
        data["mode_variant"] = "direct"
    if getattr(args, "kde", False):
        data["mode_variant"] = "kde"
    if getattr(args, "bandwidth", None) is not None:
        data["kde_bandwidth"] = args.bandwidth
    return PipelineConfig(forest=ForestConfig(**forest_data), **data)


def _load_labels(path: str) -> dict:
    """Video-id -> label mapping from a manifest or a plain JSON object."""
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if isinstance(data, dict) and "videos" in data:
        return {v["id"]: v["label"] for v in data["videos"]}
    if isinstance(data, dict):
        return {str(k): str(v) for k, v in data.items()}
    raise ValueError(f"labels file {path} must be a manifest or an id->label object")


def _cmd_synth(args) -> int:
    manifest = generate_dataset(
        args.out,
        n_per_class=args.per_class,
        width=args.width,
        height=args.height,
        frames=args.frames,
        seed=args.seed if args.seed is not None else 0,
    )
    print(f"wrote {len(manifest['videos'])} videos to {args.out}")
    return 0


def _cmd_preprocess(args) -> int:
    cfg = _build_config(args)
    seq = load_frame_sequence(args.in_dir, limit=args.limit)
    down, mode, residual = preprocess_video(seq, cfg)
    os.makedirs(args.out, exist_ok=True)
    write_pgm(os.path.join(args.out, "mode.pgm"), mode.values)
    save_frame_sequence(residual, args.out)
    print(
        f"{seq.frame_count} frames {seq.width}x{seq.height} -> residual "
        f"{residual.width}x{residual.height} in {args.out}"
    )
    return 0


def _cmd_train(args) -> int:
    cfg = _build_config(args)
    labels = _load_labels(args.labels)
    videos = []
    for video_id in sorted(labels):
        video_dir = os.path.join(args.data, video_id)
        videos.append((video_id, load_frame_sequence(video_dir), labels[video_id]))
    models, dataset = train_pipeline(videos, cfg)
    if cfg.fusion == "late":
        stem, ext = os.path.splitext(args.out)
        ext = ext or ".json"
        paths = {key: f"{stem}.{key}{ext}" for key in ("temporal", "spatial")}
    else:
        paths = {cfg.fusion: args.out}
    for key, path in paths.items():
        save_model(models[key], path)
        print(f"wrote {key} model ({models[key].descriptor_len} features) to {path}")
    if args.dump_descriptors:
        dump_descriptors(dataset, args.dump_descriptors)
        print(f"dumped {len(dataset)} descriptors to {args.dump_descriptors}")
    return 0


def _cmd_detect(args) -> int:
    cfg = _build_config(args)
    if cfg.fusion == "late":
        if not args.spatial_model:
            raise ValueError("late fusion needs --model (temporal) and --spatial-model")
        models = {"temporal": load_model(args.model), "spatial": load_model(args.spatial_model)}
    else:
        models = {cfg.fusion: load_model(args.model)}
    video = load_frame_sequence(args.in_dir, limit=args.limit)
    masks, volume = detect(video, models, cfg)
    paths = save_mask_sequence(masks, args.out)
    if args.dump_probs:
        save_probability_volume(volume, args.dump_probs)
    print(f"wrote {len(paths)} masks ({masks.width}x{masks.height}) to {args.out}")
    return 0


def _cmd_eval(args) -> int:
    pred = load_mask_sequence(args.pred)
    truth = load_mask_sequence(args.truth, (pred.width, pred.height))
    report = detection_report(pred, truth)
    print(f"detection fit: {report.video_fit:.6f} over {len(report.per_frame_fit)} frames")
    if args.report:
        doc = {"video_fit": report.video_fit, "per_frame_fit": report.per_frame_fit}
        with open(args.report, "w", encoding="ascii") as fh:
            json.dump(doc, fh, sort_keys=True, indent=2)
            fh.write("\n")
        print(f"wrote report to {args.report}")
    return 0


def _cmd_experiment(args) -> int:
    cfg = _build_config(args)
    report = run_experiment(args.data, cfg, out_dir=args.out)
    print(report["table"], end="")
    if args.out:
        print(f"report files in {args.out}")
    return 0


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aquascan", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a labeled synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--per-class", type=int, default=10)
    p.add_argument("--width", type=int, default=160)
    p.add_argument("--height", type=int, default=120)
    p.add_argument("--frames", type=int, default=260)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("preprocess", help="downsample and build the residual video")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", required=True)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--kde", action="store_true", help="kernel-density mode (default)")
    group.add_argument("--direct", action="store_true", help="plain count-argmax mode")
    p.add_argument("--bandwidth", type=float, help="fixed KDE bandwidth (default: Scott's rule)")
    p.add_argument("--limit", type=int, help="use only the first N frames")
    p.add_argument("--config")
    p.set_defaults(func=_cmd_preprocess)

    p = sub.add_parser("train", help="train forest model(s) from labeled videos")
    p.add_argument("--data", required=True, help="directory of video directories")
    p.add_argument("--labels", required=True, help="manifest.json or id->label JSON")
    p.add_argument("--out", required=True, help="model path (late mode derives two paths)")
    p.add_argument("--mode", choices=FUSION_MODES)
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--dump-descriptors", help="write the sampled descriptors as CSV")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("detect", help="detect water in one video")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--spatial-model", help="second model for late fusion")
    p.add_argument("--out", required=True, help="mask output directory")
    p.add_argument("--mode", choices=FUSION_MODES)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--limit", type=int)
    p.add_argument("--dump-probs", help="write the probability volume dump")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("eval", help="score predicted masks against the truth")
    p.add_argument("--pred", required=True, help="directory of mask_*.pgm")
    p.add_argument("--truth", required=True, help="mask file or directory")
    p.add_argument("--report", help="write a JSON report here")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("experiment", help="split, train and evaluate a dataset")
    p.add_argument("--data", required=True, help="dataset directory with manifest.json")
    p.add_argument("--out", help="write report, models and masks here")
    p.add_argument("--mode", choices=FUSION_MODES)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_experiment)

    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
