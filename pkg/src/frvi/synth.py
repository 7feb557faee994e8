"""Synthetic video generator: textured shapes translating rigidly over a
static textured background, with analytic per-pixel ground-truth flow and
a validity map that excludes disocclusions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .masks import generate_masks
from .types import MaskSpec, VideoDataError, VideoSequence, apply_mask


@dataclass
class ShapeSpec:
    """One rigidly moving textured shape. Positions and velocities are in
    integer pixels (top-left corner, (y, x) order)."""

    pos: tuple[int, int]
    vel: tuple[int, int]
    texture: np.ndarray       # (3, sh, sw), values in [0, 1]
    footprint: np.ndarray     # (sh, sw) boolean

    @property
    def size(self) -> tuple[int, int]:
        return self.footprint.shape


def _smooth_texture(rng: np.random.Generator, channels: int, h: int, w: int,
                    cell: int = 4, lo: float = 0.15, hi: float = 0.85) -> np.ndarray:
    """Bilinearly upsampled coarse noise; smooth enough for flow estimation."""
    ch = max(2, h // cell + 1)
    cw = max(2, w // cell + 1)
    coarse = rng.uniform(lo, hi, size=(channels, ch, cw))
    ys = np.linspace(0, ch - 1, h)
    xs = np.linspace(0, cw - 1, w)
    y0 = np.floor(ys).astype(int).clip(0, ch - 2)
    x0 = np.floor(xs).astype(int).clip(0, cw - 2)
    fy = (ys - y0)[None, :, None]
    fx = (xs - x0)[None, None, :]
    c00 = coarse[:, y0][:, :, x0]
    c01 = coarse[:, y0][:, :, x0 + 1]
    c10 = coarse[:, y0 + 1][:, :, x0]
    c11 = coarse[:, y0 + 1][:, :, x0 + 1]
    out = (c00 * (1 - fy) * (1 - fx) + c01 * (1 - fy) * fx
           + c10 * fy * (1 - fx) + c11 * fy * fx)
    return out.astype(np.float32)


def _advance(pos: int, vel: int, lo: int, hi: int) -> tuple[int, int]:
    """One bounce-at-walls step along one axis; returns (new_pos, new_vel)."""
    nxt = pos + vel
    if nxt < lo or nxt > hi:
        vel = -vel
        nxt = pos + vel
    return int(np.clip(nxt, lo, hi)), vel


def render_scene(shapes: list[ShapeSpec], num_frames: int, h: int, w: int,
                 background: np.ndarray):
    """Render a scene of moving shapes.

    Returns (frames, flows, validity): frames are (3, H, W); flows[t] is the
    displacement field from frame t to t+1 (defined on frame t+1 pixel
    positions); validity[t] is a boolean (H, W) map, False at disocclusions
    of the t -> t+1 warp.
    """
    if num_frames < 2:
        raise VideoDataError("num_frames must be >= 2")
    positions = [[s.pos] for s in shapes]
    velocities = [s.vel for s in shapes]
    for _ in range(num_frames - 1):
        for k, s in enumerate(shapes):
            sh, sw = s.size
            y, x = positions[k][-1]
            vy, vx = velocities[k]
            y, vy = _advance(y, vy, 0, h - sh)
            x, vx = _advance(x, vx, 0, w - sw)
            positions[k].append((y, x))
            velocities[k] = (vy, vx)

    frames, id_maps = [], []
    for t in range(num_frames):
        frame = background.copy()
        ids = np.zeros((h, w), dtype=np.int32)
        for k, s in enumerate(shapes):
            y, x = positions[k][t]
            sh, sw = s.size
            fp = s.footprint
            frame[:, y:y + sh, x:x + sw][:, fp] = s.texture[:, fp]
            ids[y:y + sh, x:x + sw][fp] = k + 1
        frames.append(frame)
        id_maps.append(ids)

    ys, xs = np.mgrid[0:h, 0:w]
    flows, validity = [], []
    for t in range(1, num_frames):
        flow = np.zeros((2, h, w), dtype=np.float32)
        for k, s in enumerate(shapes):
            y, x = positions[k][t]
            py, px = positions[k][t - 1]
            sh, sw = s.size
            fp = s.footprint
            flow[0, y:y + sh, x:x + sw][fp] = x - px
            flow[1, y:y + sh, x:x + sw][fp] = y - py
        sy = ys - np.rint(flow[1]).astype(int)
        sx = xs - np.rint(flow[0]).astype(int)
        inb = (sy >= 0) & (sy < h) & (sx >= 0) & (sx < w)
        valid = np.zeros((h, w), dtype=bool)
        valid[inb] = id_maps[t - 1][sy[inb], sx[inb]] == id_maps[t][inb]
        flows.append(flow)
        validity.append(valid)
    return frames, flows, validity


def make_shapes(rng: np.random.Generator, num_shapes: int, h: int, w: int) -> list[ShapeSpec]:
    shapes = []
    for _ in range(num_shapes):
        sh = int(rng.integers(max(4, h // 8), max(5, h // 3)))
        sw = int(rng.integers(max(4, w // 8), max(5, w // 3)))
        kind = rng.integers(0, 2)
        if kind == 0:
            footprint = np.ones((sh, sw), dtype=bool)
        else:
            yy, xx = np.mgrid[0:sh, 0:sw]
            footprint = ((yy - (sh - 1) / 2) / (sh / 2)) ** 2 + ((xx - (sw - 1) / 2) / (sw / 2)) ** 2 <= 1.0
        texture = _smooth_texture(rng, 3, sh, sw, cell=3)
        pos = (int(rng.integers(0, h - sh + 1)), int(rng.integers(0, w - sw + 1)))
        vel = (0, 0)
        while vel == (0, 0):
            vel = (int(rng.integers(-2, 3)), int(rng.integers(-2, 3)))
        shapes.append(ShapeSpec(pos=pos, vel=vel, texture=texture, footprint=footprint))
    return shapes


def synth_video_with_validity(num_shapes: int, num_frames: int, h: int, w: int,
                              seed: int = 0):
    """Like :func:`synth_video` but also returns per-step validity maps."""
    if num_frames < 2:
        raise VideoDataError("num_frames must be >= 2")
    rng = np.random.default_rng(seed)
    background = _smooth_texture(rng, 3, h, w, cell=4)
    shapes = make_shapes(rng, num_shapes, h, w)
    frames, flows, validity = render_scene(shapes, num_frames, h, w, background)
    masks = [np.zeros((1, h, w), dtype=np.float32) for _ in range(num_frames)]
    seq = VideoSequence(frames=[f.copy() for f in frames], masks=masks,
                        gt_frames=frames, gt_flows=flows)
    return seq, validity


def synth_video(num_shapes: int, num_frames: int, h: int, w: int, seed: int = 0) -> VideoSequence:
    """Generate a clean synthetic sequence with ground-truth flow.

    The returned sequence has hole-free frames and all-zero masks; use
    :func:`corrupt` to install a mask protocol.
    """
    seq, _ = synth_video_with_validity(num_shapes, num_frames, h, w, seed)
    return seq


def corrupt(seq: VideoSequence, mask_spec: MaskSpec) -> VideoSequence:
    """Install masks on a clean sequence: frames become hole-filled inputs."""
    masks = generate_masks(mask_spec, seq.num_frames)
    frames = [apply_mask(g, m) for g, m in zip(seq.gt_frames or seq.frames, masks)]
    return VideoSequence(frames=frames, masks=masks,
                         gt_frames=seq.gt_frames or [f.copy() for f in seq.frames],
                         gt_flows=seq.gt_flows)
