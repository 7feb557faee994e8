"""Evaluation metrics (hole-region l1 on an 8-bit scale, temporal warp
error, parameter counts) and the five-variant ablation driver."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .checkpoint import load_model
from .masks import generate_masks
from .model import PipelineConfig, VideoInpainter, to_tensor
from .synth import corrupt, synth_video
from .train import (Stage, TrainConfig, TrainingError, make_training_set,
                    pretrain_flow, pretrain_frames, scaled_mask_spec, train_main)
from .types import MaskKind, VideoDataError, VideoSequence
from .warp import warp_numpy


def eval_l1(outputs: list[np.ndarray], gts: list[np.ndarray],
            masks: list[np.ndarray]) -> float:
    """Mean absolute error over hole pixels across all frames, scaled by 255
    for comparability with 8-bit magnitudes. Global hole-pixel pool."""
    if not (len(outputs) == len(gts) == len(masks)):
        raise VideoDataError("sequence length mismatch")
    num = 0.0
    den = 0.0
    for o, g, m in zip(outputs, gts, masks):
        if o.shape != g.shape:
            raise VideoDataError("frame shape mismatch")
        num += float((m * np.abs(o - g)).sum())
        den += float(m.sum()) * o.shape[0]
    return 255.0 * num / den if den > 0 else 0.0


def eval_warp_error(outputs: list[np.ndarray], gt_flows: list[np.ndarray],
                    masks: list[np.ndarray]) -> float:
    """Mean masked l1 between each output and its flow-warped predecessor;
    lower means more temporally consistent."""
    if len(gt_flows) != len(outputs) - 1 or len(masks) != len(outputs):
        raise VideoDataError("sequence length mismatch")
    num = 0.0
    den = 0.0
    for t in range(1, len(outputs)):
        warped = warp_numpy(outputs[t - 1], gt_flows[t - 1])
        m = masks[t]
        num += float((m * np.abs(outputs[t] - warped)).sum())
        den += float(m.sum()) * outputs[t].shape[0]
    return num / den if den > 0 else 0.0


def count_checkpoint_params(path: str | Path) -> int:
    """Exact trainable element count of a stored model."""
    model, _ = load_model(path)
    return model.parameter_counts()["total"]


@dataclass
class EvalReport:
    variant: str
    mask_type: str
    l1: float
    warp_error: float
    params: int
    ms_per_frame: float | None = None
    data_hash: str = ""

    CSV_HEADER = "variant,mask_type,l1,warp_error,params,ms_per_frame"

    def csv_row(self) -> str:
        ms = f"{self.ms_per_frame:.3f}" if self.ms_per_frame is not None else ""
        return (f"{self.variant},{self.mask_type},{self.l1:.6f},"
                f"{self.warp_error:.6f},{self.params},{ms}")


def eval_set_hash(videos: list[VideoSequence]) -> str:
    h = hashlib.sha256()
    for seq in videos:
        for f in seq.frames:
            h.update(f.tobytes())
        for m in seq.masks:
            h.update(m.tobytes())
    return h.hexdigest()[:16]


def evaluate_model(model: VideoInpainter, videos: list[VideoSequence],
                   mask_type: str = "") -> EvalReport:
    """Clip-based evaluation of a trained model on corrupted videos."""
    outputs_l1 = []
    warp_errors = []
    num = den = 0.0
    wnum = wden = 0.0
    model.eval()
    for seq in videos:
        frames = [to_tensor(f) for f in seq.frames]
        masks = [to_tensor(m) for m in seq.masks]
        with torch.no_grad():
            outs, _ = model.process_clip(frames, masks)
        outs_np = [o.numpy()[0] for o in outs]
        for o, g, m in zip(outs_np, seq.gt_frames, seq.masks):
            num += float((m * np.abs(o - g)).sum())
            den += float(m.sum()) * 3
        for t in range(1, len(outs_np)):
            warped = warp_numpy(outs_np[t - 1], seq.gt_flows[t - 1])
            wnum += float((seq.masks[t] * np.abs(outs_np[t] - warped)).sum())
            wden += float(seq.masks[t].sum()) * 3
    return EvalReport(
        variant=model.config.variant, mask_type=mask_type,
        l1=255.0 * num / den if den > 0 else 0.0,
        warp_error=wnum / wden if wden > 0 else 0.0,
        params=model.parameter_counts()["total"],
        data_hash=eval_set_hash(videos))


@dataclass
class AblationConfig:
    """Desk-scale controlled comparison across the five pipeline variants."""

    seed: int = 0
    num_train_videos: int = 8
    num_eval_videos: int = 4
    num_shapes: int = 2
    clip_length: int = 8
    frame_size: int = 32
    mask_kind: MaskKind = MaskKind.RANDOM_WALKER
    pretrain_steps: int = 800
    pretrain_flow_steps: int = 400
    main_steps: int = 600
    learning_rate: float = 1e-4
    batch_videos: int = 2
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)


def make_eval_set(cfg: AblationConfig) -> list[VideoSequence]:
    videos = []
    for i in range(cfg.num_eval_videos):
        clean = synth_video(cfg.num_shapes, cfg.clip_length, cfg.frame_size,
                            cfg.frame_size, seed=900_000 + cfg.seed * 131 + i)
        spec = scaled_mask_spec(cfg.mask_kind, cfg.frame_size,
                                800_000 + cfg.seed * 131 + i)
        videos.append(corrupt(clean, spec))
    return videos


def train_variant(variant: str, cfg: AblationConfig,
                  dataset: list[VideoSequence], log=None) -> VideoInpainter:
    """Train one ablation variant from scratch with the shared seed."""
    pipe = PipelineConfig.from_dict({**cfg.pipeline.to_dict(), "variant": variant})
    model = VideoInpainter(pipe)
    base = dict(learning_rate=cfg.learning_rate, batch_videos=cfg.batch_videos,
                clip_length=cfg.clip_length, seed=cfg.seed)
    pretrain_frames(model, dataset,
                    TrainConfig(stage=Stage.PRETRAIN_FRAMES,
                                steps=cfg.pretrain_steps, **base), log=log)
    pretrain_flow(model, dataset,
                  TrainConfig(stage=Stage.PRETRAIN_FLOW,
                              steps=cfg.pretrain_flow_steps, **base), log=log)
    if variant != "partialconv_only":
        train_main(model, dataset,
                   TrainConfig(stage=Stage.MAIN, steps=cfg.main_steps, **base),
                   log=log)
    return model


def run_ablation(cfg: AblationConfig, log=None,
                 variants: tuple = ("partialconv_only", "convlstm_only",
                                    "fp_only", "fi_only", "ours")) -> list[EvalReport]:
    """Train and evaluate the ablation variants on identical data and seeds.

    A variant whose training diverges is reported with NaN metrics without
    aborting the others.
    """
    dataset = make_training_set(cfg.num_train_videos, cfg.num_shapes,
                                cfg.clip_length, cfg.frame_size, cfg.seed,
                                cfg.mask_kind)
    eval_videos = make_eval_set(cfg)
    reports = []
    for variant in variants:
        try:
            model = train_variant(variant, cfg, dataset, log=log)
            report = evaluate_model(model, eval_videos, mask_type=cfg.mask_kind.value)
        except TrainingError as exc:
            if log is not None:
                log(f"variant {variant} diverged: {exc}")
            report = EvalReport(variant=variant, mask_type=cfg.mask_kind.value,
                                l1=float("nan"), warp_error=float("nan"), params=0,
                                data_hash=eval_set_hash(eval_videos))
        reports.append(report)
    return reports


def format_table(reports: list[EvalReport]) -> str:
    lines = [f"{'variant':<18} {'mask':<14} {'l1':>10} {'warp_err':>10} {'params':>10}"]
    for r in reports:
        lines.append(f"{r.variant:<18} {r.mask_type:<14} {r.l1:>10.4f} "
                     f"{r.warp_error:>10.5f} {r.params:>10d}")
    return "\n".join(lines)
