"""Command-line interface.

Subcommands: generate-data, train, infer, evaluate, ablate, bench. All
accept --seed and --config; config files are flat ``key = value`` text whose
keys mirror the training config fields, and command-line flags override
config values. The infer exit codes are 0 (success), 2 (input error),
3 (numeric failure).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields
from pathlib import Path

from .container import read_video, write_video
from .evaluate import (AblationConfig, EvalReport, count_checkpoint_params,
                       evaluate_model, format_table, run_ablation)
from .inference import NumericError, StreamSession, benchmark, open_session, push_frame
from .losses import LossWeights
from .masks import generate_masks
from .model import PipelineConfig, VideoInpainter
from .synth import synth_video
from .train import (Stage, TrainConfig, make_training_set, pretrain_flow,
                    pretrain_frames, save_training_checkpoint, train_main)
from .types import MaskKind, MaskSpec, VideoDataError


def parse_config_file(path: str | Path) -> dict[str, str]:
    """Flat ``key = value`` text; '#' starts a comment."""
    values = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"bad config line: {raw!r}")
        key, val = line.split("=", 1)
        values[key.strip()] = val.strip()
    return values


_WEIGHT_KEYS = ("lambda_s", "lambda_d", "lambda_r", "lambda_f", "lambda_p", "lambda_l")


def build_train_config(overrides: dict[str, str]) -> TrainConfig:
    cfg = TrainConfig()
    weights = LossWeights()
    for key, val in overrides.items():
        if key in _WEIGHT_KEYS:
            setattr(weights, key, float(val))
        elif key == "stage":
            cfg.stage = Stage(val)
        elif key == "flow_detach":
            cfg.flow_detach = val.lower() in ("1", "true", "yes")
        elif key in ("batch_videos", "clip_length", "steps", "seed"):
            setattr(cfg, key, int(val))
        elif key in ("learning_rate", "adam_beta1", "adam_beta2", "adam_eps"):
            setattr(cfg, key, float(val))
        else:
            raise ValueError(f"unknown config key {key!r}")
    cfg.weights = weights
    return cfg


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", type=str, default=None,
                   help="flat key=value config file")


def _collect_overrides(args) -> dict[str, str]:
    overrides = {}
    if args.config:
        overrides.update(parse_config_file(args.config))
    if getattr(args, "steps", None) is not None:
        overrides["steps"] = str(args.steps)
    overrides["seed"] = str(args.seed)
    return overrides


def _load_dataset(path: Path):
    dirs = sorted(d for d in path.iterdir() if (d / "manifest.json").is_file())
    if not dirs:
        raise VideoDataError(f"no video containers found in {path}")
    return [read_video(d) for d in dirs]


def cmd_generate_data(args) -> int:
    out = Path(args.output)
    dataset = make_training_set(args.num_videos, args.shapes, args.frames,
                                args.size, args.seed, MaskKind(args.mask))
    for i, seq in enumerate(dataset):
        write_video(seq, out / f"video_{i:03d}")
    print(f"wrote {len(dataset)} videos to {out}")
    return 0


def cmd_train(args) -> int:
    cfg = build_train_config(_collect_overrides(args))
    dataset = _load_dataset(Path(args.data))
    model = VideoInpainter(PipelineConfig(variant=args.variant, seed=args.seed))
    log = print if args.verbose else None
    stages = ([Stage.PRETRAIN_FRAMES, Stage.PRETRAIN_FLOW, Stage.MAIN]
              if args.stage == "all" else [Stage(args.stage)])
    for stage in stages:
        cfg.stage = stage
        if stage is Stage.PRETRAIN_FRAMES:
            hist, adam = pretrain_frames(model, dataset, cfg, log=log)
        elif stage is Stage.PRETRAIN_FLOW:
            hist, adam = pretrain_flow(model, dataset, cfg, log=log)
        else:
            hist, adam, _audit = train_main(model, dataset, cfg, log=log)
        print(f"{stage.value}: {cfg.steps} steps, loss {hist[0]:.4g} -> {hist[-1]:.4g}")
        save_training_checkpoint(model, adam, args.checkpoint, cfg.steps, stage)
    print(f"checkpoint written to {args.checkpoint}")
    return 0


def _resolve_masks(args, seq):
    if args.masks is None:
        return seq.masks
    spec_path = Path(args.masks)
    if spec_path.is_dir():
        return read_video(spec_path).masks
    kind, _, seed = args.masks.partition(":")
    spec = MaskSpec(kind=MaskKind(kind), frame_size=seq.frame_shape[0],
                    seed=int(seed) if seed else args.seed)
    return generate_masks(spec, seq.num_frames)


def cmd_infer(args) -> int:
    try:
        seq = read_video(args.input)
        masks = _resolve_masks(args, seq)
        h, w = seq.frame_shape
        session = open_session(args.checkpoint, h, w)
    except (VideoDataError, OSError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    try:
        outputs = [push_frame(session, f, m) for f, m in zip(seq.frames, masks)]
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    from .types import VideoSequence
    out_seq = VideoSequence(frames=outputs, masks=masks)
    write_video(out_seq, args.output)
    if args.benchmark:
        import numpy as np
        times = [t * 1000 for t in session.push_times]
        print(f"{len(times)} frames: mean {np.mean(times):.2f} ms/frame, "
              f"median {np.median(times):.2f} ms/frame")
    print(f"wrote {len(outputs)} frames to {args.output}")
    return 0


def cmd_evaluate(args) -> int:
    from .checkpoint import load_model
    model, _ = load_model(args.checkpoint)
    videos = _load_dataset(Path(args.data))
    report = evaluate_model(model, videos, mask_type=args.mask)
    print(EvalReport.CSV_HEADER)
    print(report.csv_row())
    return 0


def cmd_ablate(args) -> int:
    cfg = AblationConfig(seed=args.seed,
                         pretrain_steps=args.pretrain_steps,
                         pretrain_flow_steps=args.pretrain_flow_steps,
                         main_steps=args.main_steps,
                         mask_kind=MaskKind(args.mask))
    reports = run_ablation(cfg, log=print if args.verbose else None)
    print(format_table(reports))
    if args.output:
        rows = [EvalReport.CSV_HEADER] + [r.csv_row() for r in reports]
        Path(args.output).write_text("\n".join(rows) + "\n")
        print(f"wrote {args.output}")
    return 0


def cmd_bench(args) -> int:
    seq = synth_video(2, args.frames, args.size, args.size, seed=args.seed)
    session = open_session(args.checkpoint, args.size, args.size)
    report = benchmark(session, seq.frames, seq.masks)
    print(report.format())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="frvi",
                                     description="frame-recurrent video inpainting")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate-data", help="write synthetic training videos")
    _add_common(p)
    p.add_argument("--output", required=True)
    p.add_argument("--num-videos", type=int, default=8)
    p.add_argument("--frames", type=int, default=8)
    p.add_argument("--size", type=int, default=32)
    p.add_argument("--shapes", type=int, default=2)
    p.add_argument("--mask", default="random_walker",
                   choices=[k.value for k in MaskKind])
    p.set_defaults(func=cmd_generate_data)

    p = sub.add_parser("train", help="train on a generated dataset")
    _add_common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--stage", default="all",
                   choices=["all"] + [s.value for s in Stage])
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--variant", default="ours")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="stream a video through a checkpoint")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--masks", default=None,
                   help="mask container dir or 'kind[:seed]' mask spec")
    p.add_argument("--output", required=True)
    p.add_argument("--benchmark", action="store_true")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("evaluate", help="metrics for a checkpoint on a dataset")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--mask", default="")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="train and compare the five variants")
    _add_common(p)
    p.add_argument("--output", default=None, help="CSV output path")
    p.add_argument("--pretrain-steps", type=int, default=800)
    p.add_argument("--pretrain-flow-steps", type=int, default=400)
    p.add_argument("--main-steps", type=int, default=600)
    p.add_argument("--mask", default="random_walker",
                   choices=[k.value for k in MaskKind])
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("bench", help="per-frame timing on a synthetic stream")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--frames", type=int, default=32)
    p.add_argument("--size", type=int, default=32)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
