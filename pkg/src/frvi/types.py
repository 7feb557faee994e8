"""Core value types: frames, masks, flow fields and video sequences.

Arrays are numpy float32 throughout. Frames are (3, H, W) in [0, 1], masks
are (1, H, W) binary with 1 = missing pixel, flows are (2, H, W) in pixel
units (channel 0 horizontal, channel 1 vertical).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

# U-Net depth used by the inpainting networks; frame sides must divide 2**depth.
DEFAULT_UNET_DEPTH = 3


class VideoDataError(ValueError):
    """Invalid video/mask/flow data."""


def validate_frame(pixels: np.ndarray, depth: int = DEFAULT_UNET_DEPTH) -> np.ndarray:
    pixels = np.asarray(pixels, dtype=np.float32)
    if pixels.ndim != 3 or pixels.shape[0] != 3:
        raise VideoDataError(f"frame must have shape (3, H, W), got {pixels.shape}")
    if not np.all(np.isfinite(pixels)):
        raise VideoDataError("frame contains non-finite values")
    if pixels.min() < 0.0 or pixels.max() > 1.0:
        raise VideoDataError("frame values must lie in [0, 1]")
    div = 1 << depth
    _, h, w = pixels.shape
    if h % div or w % div:
        raise VideoDataError(f"frame size {h}x{w} not divisible by {div}")
    return pixels


def validate_mask(values: np.ndarray, shape: tuple[int, int] | None = None) -> np.ndarray:
    values = np.asarray(values, dtype=np.float32)
    if values.ndim != 3 or values.shape[0] != 1:
        raise VideoDataError(f"mask must have shape (1, H, W), got {values.shape}")
    if not np.all((values == 0.0) | (values == 1.0)):
        raise VideoDataError("mask values must be exactly 0 or 1")
    if shape is not None and values.shape[1:] != tuple(shape):
        raise VideoDataError(f"mask shape {values.shape[1:]} does not match frame {shape}")
    return values


def validate_flow(displacement: np.ndarray) -> np.ndarray:
    displacement = np.asarray(displacement, dtype=np.float32)
    if displacement.ndim != 3 or displacement.shape[0] != 2:
        raise VideoDataError(f"flow must have shape (2, H, W), got {displacement.shape}")
    if not np.all(np.isfinite(displacement)):
        raise VideoDataError("flow contains non-finite values")
    bound = float(max(displacement.shape[1], displacement.shape[2]))
    if np.abs(displacement).max() > bound:
        raise VideoDataError("flow magnitude exceeds frame size")
    return displacement


@dataclass
class VideoSequence:
    """Ordered frames with aligned per-frame masks and optional ground truth."""

    frames: list[np.ndarray]
    masks: list[np.ndarray]
    gt_frames: list[np.ndarray] | None = None
    gt_flows: list[np.ndarray] | None = None

    def __post_init__(self):
        if len(self.frames) < 2:
            raise VideoDataError("a video needs at least 2 frames")
        shape = self.frames[0].shape[1:]
        self.frames = [validate_frame(f) for f in self.frames]
        for f in self.frames:
            if f.shape[1:] != shape:
                raise VideoDataError("all frames must share one shape")
        if len(self.masks) != len(self.frames):
            raise VideoDataError("masks must align 1:1 with frames")
        self.masks = [validate_mask(m, shape) for m in self.masks]
        if self.gt_frames is not None:
            if len(self.gt_frames) != len(self.frames):
                raise VideoDataError("gt_frames must align 1:1 with frames")
            self.gt_frames = [validate_frame(f) for f in self.gt_frames]
        if self.gt_flows is not None:
            if len(self.gt_flows) != len(self.frames) - 1:
                raise VideoDataError("gt_flows must have length T - 1")
            self.gt_flows = [validate_flow(f) for f in self.gt_flows]

    @property
    def num_frames(self) -> int:
        return len(self.frames)

    @property
    def frame_shape(self) -> tuple[int, int]:
        return self.frames[0].shape[1:]


class MaskKind(Enum):
    FIXED_RECT = "fixed_rect"
    RANDOM_RECT = "random_rect"
    RANDOM_WALKER = "random_walker"


@dataclass
class MaskSpec:
    """Parameters of a mask protocol.

    Rectangle side lengths are drawn from [0.375 * frame_size, 0.5 * frame_size].
    """

    kind: MaskKind
    frame_size: int
    seed: int = 0
    num_strokes: int = 6
    stroke_width_range: tuple[int, int] = (2, 6)
    walk_length_range: tuple[int, int] = (40, 120)

    def __post_init__(self):
        if self.frame_size < 16:
            raise VideoDataError("frame_size must be at least 16")
        lo, hi = self.stroke_width_range
        if lo < 1 or hi < lo:
            raise VideoDataError("invalid stroke_width_range")
        lo, hi = self.walk_length_range
        if lo < 1 or hi < lo:
            raise VideoDataError("invalid walk_length_range")

    @property
    def side_bounds(self) -> tuple[int, int]:
        return int(np.floor(0.375 * self.frame_size)), int(np.floor(0.5 * self.frame_size))


def apply_mask(frame: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Zero out the missing pixels of ``frame`` (mask value 1 = hole)."""
    frame = validate_frame(frame)
    mask = validate_mask(mask, frame.shape[1:])
    return frame * (1.0 - mask)
