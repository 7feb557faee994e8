"""Frame-recurrent video inpainting: partial-convolution frame inpainting,
two-branch robust flow generation with learned blending, and a ConvLSTM
refiner, with streaming inference and a synthetic ground-truth-flow dataset."""

from .flow import (FlowEstimatorConfig, FlowMethod, NormalizedFlow,
                   compose_flows, denormalize_flow, estimate_flow,
                   long_range_flow, normalize_flow)
from .masks import generate_masks
from .model import PipelineConfig, VideoInpainter
from .synth import corrupt, synth_video, synth_video_with_validity
from .types import (MaskKind, MaskSpec, VideoDataError, VideoSequence,
                    apply_mask)
from .warp import warp, warp_numpy

__all__ = [
    "FlowEstimatorConfig", "FlowMethod", "NormalizedFlow", "compose_flows",
    "denormalize_flow", "estimate_flow", "long_range_flow", "normalize_flow",
    "generate_masks", "PipelineConfig", "VideoInpainter", "corrupt",
    "synth_video", "synth_video_with_validity", "MaskKind", "MaskSpec",
    "VideoDataError", "VideoSequence", "apply_mask", "warp", "warp_numpy",
]
