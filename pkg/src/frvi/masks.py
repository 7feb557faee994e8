"""Mask protocol generators: fixed rectangles, per-frame random rectangles
and random-walker streaks. All generators are pure functions of (spec, T)."""

from __future__ import annotations

import numpy as np

from .types import MaskKind, MaskSpec, VideoDataError


def _random_rect(rng: np.random.Generator, l: int) -> np.ndarray:
    lo, hi = int(np.floor(0.375 * l)), int(np.floor(0.5 * l))
    h = int(rng.integers(lo, hi + 1))
    w = int(rng.integers(lo, hi + 1))
    y = int(rng.integers(0, l - h + 1))
    x = int(rng.integers(0, l - w + 1))
    mask = np.zeros((1, l, l), dtype=np.float32)
    mask[0, y:y + h, x:x + w] = 1.0
    return mask


def _stamp_disc(mask: np.ndarray, y: float, x: float, radius: float) -> None:
    l = mask.shape[1]
    r = int(np.ceil(radius))
    y0, y1 = max(0, int(y) - r), min(l, int(y) + r + 2)
    x0, x1 = max(0, int(x) - r), min(l, int(x) + r + 2)
    if y0 >= y1 or x0 >= x1:
        return
    yy, xx = np.mgrid[y0:y1, x0:x1]
    hit = (yy - y) ** 2 + (xx - x) ** 2 <= radius ** 2
    mask[0, y0:y1, x0:x1][hit] = 1.0


def _random_walker(rng: np.random.Generator, spec: MaskSpec) -> np.ndarray:
    l = spec.frame_size
    mask = np.zeros((1, l, l), dtype=np.float32)
    for _ in range(spec.num_strokes):
        steps = int(rng.integers(spec.walk_length_range[0], spec.walk_length_range[1] + 1))
        width = float(rng.uniform(spec.stroke_width_range[0], spec.stroke_width_range[1]))
        y = float(rng.uniform(0, l))
        x = float(rng.uniform(0, l))
        angle = float(rng.uniform(0, 2 * np.pi))
        for _ in range(steps):
            _stamp_disc(mask, y, x, width / 2.0)
            # per-step heading perturbation bounded by 30 degrees
            angle += float(rng.uniform(-np.pi / 6, np.pi / 6))
            y = float(np.clip(y + np.sin(angle), 0, l - 1))
            x = float(np.clip(x + np.cos(angle), 0, l - 1))
    return mask


def generate_masks(spec: MaskSpec, num_frames: int) -> list[np.ndarray]:
    """Generate ``num_frames`` masks per the protocol in ``spec``.

    Deterministic: the same (spec, num_frames) always yields identical masks.
    """
    if num_frames < 1:
        raise VideoDataError("num_frames must be >= 1")
    rng = np.random.default_rng(spec.seed)
    if spec.kind is MaskKind.FIXED_RECT:
        rect = _random_rect(rng, spec.frame_size)
        return [rect.copy() for _ in range(num_frames)]
    if spec.kind is MaskKind.RANDOM_RECT:
        return [_random_rect(rng, spec.frame_size) for _ in range(num_frames)]
    if spec.kind is MaskKind.RANDOM_WALKER:
        return [_random_walker(rng, spec) for _ in range(num_frames)]
    raise VideoDataError(f"unknown mask kind {spec.kind}")
