"""Flow engine: a classical coarse-to-fine estimator behind the pluggable
estimator contract, instance-wise flow normalization with the 2-to-3 channel
transform, and long-range flow construction (direct or composed)."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import ndimage

from .types import VideoDataError, VideoSequence, validate_flow
from .warp import warp_numpy

# weighted neighbour average used by the iterative solver
_AVG_KERNEL = np.array([[1 / 12, 1 / 6, 1 / 12],
                        [1 / 6, 0.0, 1 / 6],
                        [1 / 12, 1 / 6, 1 / 12]])
_INNER_ITERATIONS = 50


class FlowMethod(Enum):
    CLASSICAL = "classical"
    GROUND_TRUTH = "ground_truth"


@dataclass
class FlowEstimatorConfig:
    method: FlowMethod = FlowMethod.CLASSICAL
    pyramid_levels: int = 4
    iterations: int = 20
    smoothness_weight: float = 0.5

    def __post_init__(self):
        if self.pyramid_levels < 1 or self.iterations < 1:
            raise ValueError("pyramid_levels and iterations must be >= 1")


def _to_gray(frame: np.ndarray) -> np.ndarray:
    return frame.mean(axis=0).astype(np.float64)


def _downsample(img: np.ndarray) -> np.ndarray:
    smoothed = ndimage.gaussian_filter(img, sigma=1.0, mode="reflect")
    return ndimage.zoom(smoothed, 0.5, order=1, mode="reflect", grid_mode=True)


def _resize_flow(flow: np.ndarray, h: int, w: int) -> np.ndarray:
    sy = h / flow.shape[1]
    sx = w / flow.shape[2]
    out = np.stack([
        ndimage.zoom(flow[0], (sy, sx), order=1, mode="reflect", grid_mode=True) * sx,
        ndimage.zoom(flow[1], (sy, sx), order=1, mode="reflect", grid_mode=True) * sy,
    ])
    return out


def _hs_refine(a: np.ndarray, b: np.ndarray, flow: np.ndarray, alpha: float,
               outer_iterations: int) -> np.ndarray:
    """Iteratively refine ``flow`` so that sampling a at p - flow matches b."""
    for _ in range(outer_iterations):
        aw = warp_numpy(a[None], flow.astype(np.float32))[0].astype(np.float64)
        gy_a, gx_a = np.gradient(aw)
        gy_b, gx_b = np.gradient(b)
        ix = 0.5 * (gx_a + gx_b)
        iy = 0.5 * (gy_a + gy_b)
        it = b - aw
        du = np.zeros_like(ix)
        dv = np.zeros_like(ix)
        denom = alpha ** 2 + ix ** 2 + iy ** 2
        for _ in range(_INNER_ITERATIONS):
            du_bar = ndimage.convolve(du, _AVG_KERNEL, mode="reflect")
            dv_bar = ndimage.convolve(dv, _AVG_KERNEL, mode="reflect")
            shared = (ix * du_bar + iy * dv_bar + it) / denom
            du = du_bar - ix * shared
            dv = dv_bar - iy * shared
        flow = flow + np.stack([du, dv])
    return flow


def estimate_flow(a: np.ndarray, b: np.ndarray, cfg: FlowEstimatorConfig,
                  gt: np.ndarray | None = None) -> np.ndarray:
    """Estimate the flow F such that warp(a, F) aligns with b.

    With ``FlowMethod.GROUND_TRUTH`` the supplied ``gt`` flow is returned
    unchanged (the passthrough mode for synthetic data).
    """
    if a.shape != b.shape:
        raise VideoDataError(f"frame shapes differ: {a.shape} vs {b.shape}")
    if cfg.method is FlowMethod.GROUND_TRUTH:
        if gt is None:
            raise VideoDataError("ground-truth passthrough requires a gt flow")
        return validate_flow(gt)
    ga, gb = _to_gray(a), _to_gray(b)
    levels = [(ga, gb)]
    while (len(levels) < cfg.pyramid_levels
           and min(levels[-1][0].shape) >= 16):
        pa, pb = levels[-1]
        levels.append((_downsample(pa), _downsample(pb)))
    flow = np.zeros((2,) + levels[-1][0].shape)
    for la, lb in reversed(levels):
        if flow.shape[1:] != la.shape:
            flow = _resize_flow(flow, *la.shape)
        flow = _hs_refine(la, lb, flow, cfg.smoothness_weight, cfg.iterations)
    h, w = ga.shape
    bound = float(max(h, w))
    return np.clip(flow, -bound, bound).astype(np.float32)


@dataclass
class NormalizedFlow:
    """Flow mapped to [-1, 1] by its instance-wise joint value range, with a
    third channel holding the mean of the first two."""

    values: np.ndarray        # (3, H, W)
    range_min: float
    range_max: float


def normalize_flow(flow: np.ndarray) -> NormalizedFlow:
    flow = validate_flow(flow)
    lo = float(flow.min())
    hi = float(flow.max())
    if hi == lo:
        mapped = np.zeros(flow.shape, dtype=np.float64)
    else:
        mapped = 2.0 * (flow.astype(np.float64) - lo) / (hi - lo) - 1.0
    values = np.concatenate([mapped, mapped.mean(axis=0, keepdims=True)])
    return NormalizedFlow(values=values.astype(np.float32), range_min=lo, range_max=hi)


def denormalize_flow(nf: NormalizedFlow) -> np.ndarray:
    values = nf.values[:2].astype(np.float64)
    if nf.range_max == nf.range_min:
        flow = np.full(values.shape, nf.range_min)
    else:
        flow = (values + 1.0) / 2.0 * (nf.range_max - nf.range_min) + nf.range_min
    return flow.astype(np.float32)


def compose_flows(first: np.ndarray, step: np.ndarray) -> np.ndarray:
    """Compose F_{a,t-1} (``first``) with F_{t-1,t} (``step``) into F_{a,t}:
    warp-and-add, warp(frame_a, result) aligns with frame_t."""
    return step + warp_numpy(first, step)


def long_range_flow(seq: VideoSequence, t: int, anchor: int,
                    cfg: FlowEstimatorConfig, mode: str = "direct",
                    use_gt_frames: bool = False) -> np.ndarray:
    """Flow F such that warp(frame[anchor], F) aligns with frame[t].

    ``mode`` is "direct" (one estimation between the two frames, the default)
    or "composed" (warp-and-add over per-step flows). Composition with the
    ground-truth passthrough method only supports t >= anchor, since only
    forward step flows are stored.
    """
    frames = seq.gt_frames if (use_gt_frames and seq.gt_frames is not None) else seq.frames
    n = len(frames)
    if not (0 <= t < n and 0 <= anchor < n):
        raise VideoDataError("t and anchor must be valid frame indices")
    h, w = seq.frame_shape
    if t == anchor:
        return np.zeros((2, h, w), dtype=np.float32)
    if mode == "direct":
        if cfg.method is FlowMethod.GROUND_TRUTH:
            raise VideoDataError("direct long-range flow requires an estimator")
        return estimate_flow(frames[anchor], frames[t], cfg)
    if mode != "composed":
        raise ValueError(f"unknown long-range mode {mode!r}")
    flow = np.zeros((2, h, w), dtype=np.float32)
    forward = t > anchor
    indices = range(anchor, t) if forward else range(anchor, t, -1)
    for s in indices:
        if forward:
            if cfg.method is FlowMethod.GROUND_TRUTH:
                if seq.gt_flows is None:
                    raise VideoDataError("passthrough composition requires gt_flows")
                step = seq.gt_flows[s]
            else:
                step = estimate_flow(frames[s], frames[s + 1], cfg)
        else:
            if cfg.method is FlowMethod.GROUND_TRUTH:
                raise VideoDataError("passthrough composition only supports t >= anchor")
            step = estimate_flow(frames[s], frames[s - 1], cfg)
        flow = compose_flows(flow, step)
    return validate_flow(flow)
