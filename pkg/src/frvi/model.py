"""Full frame-recurrent inpainting pipeline: bundles the frame inpainter,
flow completion, flow blending and recurrent refiner networks, and provides
the per-clip forward used identically by training, batch evaluation and
streaming inference (so streaming and batch outputs are bit-identical)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn

from .flow import (FlowEstimatorConfig, denormalize_flow, estimate_flow,
                   normalize_flow)
from .nets import (ConvLSTMState, FeaturePyramid, FlowBlender, FlowCompleter,
                   FrameInpainter, Refiner, UNetConfig, count_params)

VARIANTS = ("ours", "partialconv_only", "convlstm_only", "fp_only", "fi_only")


@dataclass
class PipelineConfig:
    variant: str = "ours"
    unet: UNetConfig = field(default_factory=UNetConfig)
    flow: FlowEstimatorConfig = field(default_factory=FlowEstimatorConfig)
    refiner_base: int = 16
    refiner_hidden: int = 32
    blender_base: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "unet_depth": self.unet.depth,
            "unet_base_channels": self.unet.base_channels,
            "flow_pyramid_levels": self.flow.pyramid_levels,
            "flow_iterations": self.flow.iterations,
            "flow_smoothness_weight": self.flow.smoothness_weight,
            "refiner_base": self.refiner_base,
            "refiner_hidden": self.refiner_hidden,
            "blender_base": self.blender_base,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        return cls(
            variant=d["variant"],
            unet=UNetConfig(depth=d["unet_depth"], base_channels=d["unet_base_channels"]),
            flow=FlowEstimatorConfig(pyramid_levels=d["flow_pyramid_levels"],
                                     iterations=d["flow_iterations"],
                                     smoothness_weight=d["flow_smoothness_weight"]),
            refiner_base=d["refiner_base"],
            refiner_hidden=d["refiner_hidden"],
            blender_base=d["blender_base"],
            seed=d["seed"],
        )


def to_tensor(array: np.ndarray, dtype=torch.float32) -> torch.Tensor:
    return torch.from_numpy(np.ascontiguousarray(array)).to(dtype)[None]


def to_array(tensor: torch.Tensor) -> np.ndarray:
    return tensor.detach().cpu().numpy().astype(np.float32)[0]


class VideoInpainter(nn.Module):
    """The whole model. Component seeds derive from the pipeline seed so two
    models built from the same config are bit-identical."""

    def __init__(self, config: PipelineConfig | None = None):
        super().__init__()
        self.config = config or PipelineConfig()
        torch.manual_seed(self.config.seed)
        self.hs = FrameInpainter(self.config.unet)
        self.hc = FlowCompleter(self.config.unet)
        self.hf = FlowBlender(self.config.blender_base)
        self.ht = Refiner(self.config.refiner_base, self.config.refiner_hidden)
        self.hp = FeaturePyramid(seed=self.config.seed + 1)

    # -- flow branch -------------------------------------------------------

    def estimate_flow_np(self, a: torch.Tensor, b: torch.Tensor) -> np.ndarray:
        """Classical (non-differentiable) flow between two frame tensors."""
        return estimate_flow(to_array(a), to_array(b), self.config.flow)

    def complete_flow(self, fhat: np.ndarray, hole_union: torch.Tensor,
                      dtype=torch.float32) -> np.ndarray:
        """Run the flow completion network on a defective flow estimate."""
        nf = normalize_flow(fhat)
        with torch.no_grad():
            completed = self.hc(to_tensor(nf.values, dtype), hole_union.to(dtype))
        nf.values = np.concatenate([to_array(completed),
                                    to_array(completed).mean(axis=0, keepdims=True)])
        return denormalize_flow(nf)

    def robust_flow(self, p_prev, p_cur, i_prev, i_cur, m_prev, m_cur):
        """Two-branch flow generation plus blending for one frame pair.

        Returns (blended flow, fp, fi) as tensors; fp/fi carry no gradient,
        the blend carries gradient into the blender parameters only.
        """
        fp = to_tensor(self.estimate_flow_np(p_prev, p_cur), p_prev.dtype)
        fhat = self.estimate_flow_np(i_prev, i_cur)
        hole_union = torch.max(m_prev, m_cur)
        fi = to_tensor(self.complete_flow(fhat, hole_union, p_prev.dtype), p_prev.dtype)
        blended = self.blend(fp, fi)
        return blended, fp, fi

    def blend(self, fp: torch.Tensor, fi: torch.Tensor) -> torch.Tensor:
        if self.config.variant == "fp_only":
            return fp
        if self.config.variant == "fi_only":
            return fi
        return self.hf(fp, fi)

    # -- frame branch ------------------------------------------------------

    def inpaint_frame(self, frame: torch.Tensor, hole: torch.Tensor,
                      index: int | None = None, last_index: int | None = None) -> torch.Tensor:
        """Single-frame inpainting; under the ConvLSTM-only variant, only the
        first and last frame of a clip pass through the inpainter."""
        if self.config.variant == "convlstm_only" and index is not None:
            if index != 0 and (last_index is None or index != last_index):
                return frame
        return self.hs(frame, hole)

    def composite(self, output: torch.Tensor, frame: torch.Tensor,
                  hole: torch.Tensor) -> torch.Tensor:
        return (1.0 - hole) * frame + hole * output

    def refine_step(self, o_prev: torch.Tensor, p_cur: torch.Tensor,
                    i_cur: torch.Tensor, hole: torch.Tensor,
                    state: ConvLSTMState) -> tuple[torch.Tensor, ConvLSTMState]:
        o_cur, new_state, _ = self.ht(o_prev, p_cur, state)
        return self.composite(o_cur, i_cur, hole), new_state

    def process_clip(self, frames: list[torch.Tensor], masks: list[torch.Tensor],
                     p_frames: list[torch.Tensor] | None = None):
        """Run the full pipeline over a clip; returns (outputs, p_frames).

        ``p_frames`` may be supplied precomputed (e.g. while the inpainter is
        frozen during main training).
        """
        n = len(frames)
        if p_frames is None:
            p_frames = [self.inpaint_frame(frames[t], masks[t], t, n - 1)
                        for t in range(n)]
        outputs = [self.composite(p_frames[0], frames[0], masks[0])]
        if self.config.variant == "partialconv_only":
            for t in range(1, n):
                outputs.append(self.composite(p_frames[t], frames[t], masks[t]))
            return outputs, p_frames
        b, _, h, w = frames[0].shape
        state = self.ht.zero_state(b, h, w, device=frames[0].device, dtype=frames[0].dtype)
        for t in range(1, n):
            o, state = self.refine_step(outputs[-1], p_frames[t], frames[t],
                                        masks[t], state)
            outputs.append(o)
        return outputs, p_frames

    def parameter_counts(self) -> dict[str, int]:
        counts = {name: count_params(getattr(self, name))
                  for name in ("hs", "hc", "hf", "ht")}
        counts["total"] = sum(counts.values())
        return counts
