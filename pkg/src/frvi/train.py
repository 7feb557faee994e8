"""Two-stage training: (1) pretrain the frame inpainter and the flow
completion network, (2) train the refiner and the flow blender with the two
inpainting modules frozen. Adam with bias correction, gradient clipping by
global norm, a divergence guard, and fully replayable batches: every batch
is a pure function of (seed, step), so resuming from a checkpoint is
bit-identical to an uninterrupted run."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
import torch

from . import losses
from .checkpoint import load_extras, load_model, save_model
from .flow import FlowEstimatorConfig, estimate_flow, normalize_flow
from .losses import LossWeights, total_loss
from .masks import generate_masks
from .model import PipelineConfig, VideoInpainter, to_tensor
from .synth import corrupt, synth_video
from .types import MaskKind, MaskSpec, VideoSequence

GRAD_CLIP_NORM = 5.0


class TrainingError(RuntimeError):
    pass


class Stage(Enum):
    PRETRAIN_FRAMES = "pretrain_frames"
    PRETRAIN_FLOW = "pretrain_flow"
    MAIN = "main"


@dataclass
class TrainConfig:
    stage: Stage = Stage.MAIN
    learning_rate: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_videos: int = 2
    clip_length: int = 8
    steps: int = 100
    seed: int = 0
    weights: LossWeights = field(default_factory=LossWeights)
    flow_detach: bool = True

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.clip_length < 2:
            raise ValueError("clip_length must be >= 2")


@dataclass
class AdamState:
    """First/second moment buffers keyed by parameter name."""

    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0


def adam_step(params: dict[str, torch.nn.Parameter], state: AdamState,
              lr: float, betas: tuple[float, float] = (0.9, 0.999),
              eps: float = 1e-8) -> AdamState:
    """One bias-corrected Adam update in place; zeroes gradients afterward.

    Parameters with no gradient are treated as zero-gradient (their moments
    decay). A NaN gradient aborts the step, naming the parameter.
    """
    b1, b2 = betas
    state.step += 1
    t = state.step
    for name, p in params.items():
        grad = p.grad
        if grad is not None and not torch.isfinite(grad).all():
            raise TrainingError(f"non-finite gradient in parameter {name!r}")
    for name, p in params.items():
        grad = p.grad if p.grad is not None else torch.zeros_like(p)
        if name not in state.m:
            state.m[name] = torch.zeros_like(p)
            state.v[name] = torch.zeros_like(p)
        state.m[name].mul_(b1).add_(grad, alpha=1 - b1)
        state.v[name].mul_(b2).addcmul_(grad, grad, value=1 - b2)
        m_hat = state.m[name] / (1 - b1 ** t)
        v_hat = state.v[name] / (1 - b2 ** t)
        with torch.no_grad():
            p.addcdiv_(m_hat, v_hat.sqrt().add_(eps), value=-lr)
        if p.grad is not None:
            p.grad.zero_()
    return state


def make_training_set(num_videos: int, num_shapes: int, num_frames: int,
                      size: int, seed: int,
                      mask_kind: MaskKind = MaskKind.RANDOM_WALKER) -> list[VideoSequence]:
    """Synthetic corrupted videos with ground truth frames and flows."""
    videos = []
    for i in range(num_videos):
        clean = synth_video(num_shapes, num_frames, size, size, seed=seed * 7919 + i)
        spec = scaled_mask_spec(mask_kind, size, seed * 104729 + i)
        videos.append(corrupt(clean, spec))
    return videos


def scaled_mask_spec(kind: MaskKind, size: int, seed: int) -> MaskSpec:
    """Walker stroke counts/lengths scaled to the frame size so hole coverage
    stays moderate at desk scale (the stock defaults target 64px frames)."""
    if kind is not MaskKind.RANDOM_WALKER or size >= 64:
        return MaskSpec(kind=kind, frame_size=size, seed=seed)
    return MaskSpec(kind=kind, frame_size=size, seed=seed,
                    num_strokes=3,
                    walk_length_range=(max(4, size // 3), size),
                    stroke_width_range=(2, 4))


def _step_rng(seed: int, step: int) -> np.random.Generator:
    return np.random.default_rng([seed, step])


def _batch_indices(rng: np.random.Generator, n: int, k: int) -> list[int]:
    return list(rng.choice(n, size=min(k, n), replace=False))


def _named_params(*modules) -> dict[str, torch.nn.Parameter]:
    out = {}
    for prefix, mod in modules:
        for name, p in mod.named_parameters():
            out[f"{prefix}.{name}"] = p
    return out


def _guard(history: list[float], value: float) -> None:
    if history and value > 10.0 * history[0]:
        raise TrainingError(
            f"divergence: loss {value:.4g} exceeds 10x initial {history[0]:.4g}")


def _clip_grads(params: dict[str, torch.nn.Parameter]) -> None:
    torch.nn.utils.clip_grad_norm_(list(params.values()), GRAD_CLIP_NORM)


def pretrain_frames(model: VideoInpainter, dataset: list[VideoSequence],
                    cfg: TrainConfig, adam: AdamState | None = None,
                    start_step: int = 0, log=None) -> tuple[list[float], AdamState]:
    """Stage 1a: masked reconstruction training of the frame inpainter."""
    adam = adam or AdamState()
    params = _named_params(("hs", model.hs))
    history = []
    for step in range(start_step, start_step + cfg.steps):
        rng = _step_rng(cfg.seed, step)
        outs, gts, masks = [], [], []
        for vi in _batch_indices(rng, len(dataset), cfg.batch_videos):
            seq = dataset[vi]
            t = int(rng.integers(0, seq.num_frames))
            frame = to_tensor(seq.frames[t])
            mask = to_tensor(seq.masks[t])
            outs.append(model.hs(frame, mask))
            gts.append(to_tensor(seq.gt_frames[t]))
            masks.append(mask)
        total, report = total_loss(outs, gts, masks, extractor=model.hp,
                                   weights=cfg.weights)
        total.backward()
        _clip_grads(params)
        adam = adam_step(params, adam, cfg.learning_rate,
                         (cfg.adam_beta1, cfg.adam_beta2), cfg.adam_eps)
        _guard(history, float(total.item()))
        history.append(float(total.item()))
        if log is not None:
            log(report.format_line(step))
    return history, adam


def _flow_samples(dataset: list[VideoSequence], flow_cfg: FlowEstimatorConfig):
    """Precompute defective flow estimates and normalized-domain targets for
    every consecutive pair of every video (inputs are fixed during training)."""
    samples = []
    for seq in dataset:
        for t in range(1, seq.num_frames):
            fhat = estimate_flow(seq.frames[t - 1], seq.frames[t], flow_cfg)
            nf = normalize_flow(fhat)
            hole = np.maximum(seq.masks[t - 1], seq.masks[t])
            gt = seq.gt_flows[t - 1].astype(np.float64)
            if nf.range_max > nf.range_min:
                gt_n = 2.0 * (gt - nf.range_min) / (nf.range_max - nf.range_min) - 1.0
            else:
                gt_n = gt
            samples.append((nf.values, hole, gt_n.astype(np.float32)))
    return samples


def pretrain_flow(model: VideoInpainter, dataset: list[VideoSequence],
                  cfg: TrainConfig, adam: AdamState | None = None,
                  start_step: int = 0, log=None) -> tuple[list[float], AdamState]:
    """Stage 1b: flow completion training with normalized-domain targets."""
    adam = adam or AdamState()
    params = _named_params(("hc", model.hc))
    samples = _flow_samples(dataset, model.config.flow)
    history = []
    for step in range(start_step, start_step + cfg.steps):
        rng = _step_rng(cfg.seed + 1, step)
        total = None
        for si in _batch_indices(rng, len(samples), cfg.batch_videos):
            nf_values, hole, gt_n = samples[si]
            pred = model.hc(to_tensor(nf_values), to_tensor(hole))
            term = (pred - to_tensor(gt_n)).abs().mean()
            total = term if total is None else total + term
        total = cfg.weights.lambda_f * total
        total.backward()
        _clip_grads(params)
        adam = adam_step(params, adam, cfg.learning_rate,
                         (cfg.adam_beta1, cfg.adam_beta2), cfg.adam_eps)
        _guard(history, float(total.item()))
        history.append(float(total.item()))
        if log is not None:
            log(f"step={step} flow={total.item():.6g}")
    return history, adam


@dataclass
class PrecomputedClip:
    """Per-video tensors that are fixed while the inpainting modules are
    frozen: inpainted frames, both flow branches (forward and reverse) and
    direct long-range flows to the clip endpoints."""

    frames: list
    masks: list
    gts: list
    p_frames: list
    fp: list
    fi: list
    fp_rev: list
    fi_rev: list
    to_first: list
    to_last: list
    gt_flows: list


def precompute_clip(model: VideoInpainter, seq: VideoSequence) -> PrecomputedClip:
    n = seq.num_frames
    frames = [to_tensor(f) for f in seq.frames]
    masks = [to_tensor(m) for m in seq.masks]
    gts = [to_tensor(g) for g in seq.gt_frames]
    with torch.no_grad():
        p_frames = [model.inpaint_frame(frames[t], masks[t], t, n - 1).detach()
                    for t in range(n)]
    fp, fi, fp_rev, fi_rev = [], [], [], []
    for t in range(1, n):
        fp.append(to_tensor(model.estimate_flow_np(p_frames[t - 1], p_frames[t])))
        fhat = model.estimate_flow_np(frames[t - 1], frames[t])
        hole = torch.max(masks[t - 1], masks[t])
        fi.append(to_tensor(model.complete_flow(fhat, hole)))
        # reverse direction: freshly estimated on the reversed sequence
        rt = n - 1 - t
        fp_rev.append(to_tensor(model.estimate_flow_np(p_frames[rt + 1], p_frames[rt])))
        fhat_r = model.estimate_flow_np(frames[rt + 1], frames[rt])
        hole_r = torch.max(masks[rt + 1], masks[rt])
        fi_rev.append(to_tensor(model.complete_flow(fhat_r, hole_r)))
    to_first, to_last = [], []
    for t in range(n):
        if t == 0:
            to_first.append(torch.zeros_like(fp[0]))
        else:
            to_first.append(to_tensor(model.estimate_flow_np(p_frames[t], p_frames[0])))
        if t == n - 1:
            to_last.append(torch.zeros_like(fp[0]))
        else:
            to_last.append(to_tensor(model.estimate_flow_np(p_frames[t], p_frames[n - 1])))
    gt_flows = [to_tensor(f) for f in seq.gt_flows]
    return PrecomputedClip(frames=frames, masks=masks, gts=gts, p_frames=p_frames,
                           fp=fp, fi=fi, fp_rev=fp_rev, fi_rev=fi_rev,
                           to_first=to_first, to_last=to_last, gt_flows=gt_flows)


def snapshot_params(*modules) -> dict[str, np.ndarray]:
    out = {}
    for prefix, mod in modules:
        for name, p in mod.named_parameters():
            out[f"{prefix}.{name}"] = p.detach().cpu().numpy().copy()
    return out


def train_main(model: VideoInpainter, dataset: list[VideoSequence],
               cfg: TrainConfig, adam: AdamState | None = None,
               start_step: int = 0, log=None,
               precomputed: list[PrecomputedClip] | None = None):
    """Stage 2: unroll the full pipeline per clip and train the refiner and
    the flow blender only. The frame inpainter and flow completion network
    are frozen; any parameter change there is a hard failure.

    Returns (history, adam_state, audit) where audit records the frozen-stage
    and gradient-flow checks of the run.
    """
    adam = adam or AdamState()
    model.hs.requires_grad_(False)
    model.hc.requires_grad_(False)
    frozen_before = snapshot_params(("hs", model.hs), ("hc", model.hc))
    params = _named_params(("ht", model.ht), ("hf", model.hf))
    if precomputed is None:
        precomputed = [precompute_clip(model, seq) for seq in dataset]
    history = []
    audit = {"ht_grad_nonzero": False, "hf_grad_nonzero": False,
             "hs_hc_grad_zero": True, "frozen_identical": None}
    for step in range(start_step, start_step + cfg.steps):
        rng = _step_rng(cfg.seed + 2, step)
        total = None
        for vi in _batch_indices(rng, len(precomputed), cfg.batch_videos):
            clip = precomputed[vi]
            n = len(clip.frames)
            flows = [model.blend(clip.fp[t], clip.fi[t]) for t in range(n - 1)]
            rev_flows = [model.blend(clip.fp_rev[t], clip.fi_rev[t]).detach()
                         for t in range(n - 1)]
            outputs, _ = model.process_clip(clip.frames, clip.masks,
                                            p_frames=clip.p_frames)
            term, report = total_loss(
                outputs, clip.gts, clip.masks, flows=flows,
                gt_flows=clip.gt_flows, reverse_flows=rev_flows,
                flows_to_first=clip.to_first, flows_to_last=clip.to_last,
                extractor=model.hp, weights=cfg.weights,
                detach_flow=cfg.flow_detach)
            total = term if total is None else total + term
        total.backward()
        if step == start_step:
            audit["ht_grad_nonzero"] = any(
                p.grad is not None and p.grad.abs().sum() > 0
                for p in model.ht.parameters())
            audit["hf_grad_nonzero"] = any(
                p.grad is not None and p.grad.abs().sum() > 0
                for p in model.hf.parameters())
            audit["hs_hc_grad_zero"] = all(
                p.grad is None or p.grad.abs().sum() == 0
                for m in (model.hs, model.hc) for p in m.parameters())
        _clip_grads(params)
        adam = adam_step(params, adam, cfg.learning_rate,
                         (cfg.adam_beta1, cfg.adam_beta2), cfg.adam_eps)
        _guard(history, float(total.item()))
        history.append(float(total.item()))
        if log is not None:
            log(report.format_line(step))
    frozen_after = snapshot_params(("hs", model.hs), ("hc", model.hc))
    identical = all(np.array_equal(frozen_before[k], frozen_after[k])
                    for k in frozen_before)
    audit["frozen_identical"] = identical
    if not identical:
        raise TrainingError("frozen inpainting modules changed during main stage")
    return history, adam, audit


# -- training checkpoints (model + optimizer state) ------------------------

def save_training_checkpoint(model: VideoInpainter, adam: AdamState,
                             path: str | Path, step: int, stage: Stage) -> None:
    extras = {}
    for name, t in adam.m.items():
        extras[f"adam_m.{name}"] = t.detach().cpu().numpy()
    for name, t in adam.v.items():
        extras[f"adam_v.{name}"] = t.detach().cpu().numpy()
    save_model(model, path, step=step, extra_arrays=extras,
               extra_meta={"stage": stage.value, "adam_step": adam.step})


def load_training_checkpoint(path: str | Path):
    model, manifest = load_model(path)
    extras = load_extras(path)
    adam = AdamState(step=int(manifest["meta"].get("adam_step", 0)))
    for name, arr in extras.items():
        kind, pname = name.split(".", 1)
        if kind == "adam_m":
            adam.m[pname] = torch.from_numpy(arr)
        elif kind == "adam_v":
            adam.v[pname] = torch.from_numpy(arr)
    return model, adam, int(manifest["step"]), Stage(manifest["meta"]["stage"])
