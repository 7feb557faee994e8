"""Differentiable backward warping.

Convention: ``warp(frame, flow)(p) = bilinear_sample(frame, p - flow(p))``,
so a frame translated by d and a constant flow d cancel. Out-of-bounds
sample positions clamp to the border. The op is differentiable with
respect to both the frame and the flow; with zero flow it is a bit-exact
identity (sample positions are exact integers, interpolation weights 0/1).
"""

from __future__ import annotations

import numpy as np
import torch


def warp(frame: torch.Tensor, flow: torch.Tensor) -> torch.Tensor:
    """Backward-warp ``frame`` by ``flow``.

    frame: (B, C, H, W); flow: (B, 2, H, W), channel 0 horizontal (x),
    channel 1 vertical (y), in pixels.
    """
    if not torch.isfinite(flow).all():
        raise ValueError("flow contains non-finite values")
    b, c, h, w = frame.shape
    device, dtype = frame.device, frame.dtype
    ys = torch.arange(h, device=device, dtype=dtype).view(1, h, 1)
    xs = torch.arange(w, device=device, dtype=dtype).view(1, 1, w)
    px = (xs - flow[:, 0]).clamp(0, w - 1)
    py = (ys - flow[:, 1]).clamp(0, h - 1)

    x0 = px.floor()
    y0 = py.floor()
    fx = px - x0
    fy = py - y0
    x0 = x0.long()
    y0 = y0.long()
    x1 = (x0 + 1).clamp(max=w - 1)
    y1 = (y0 + 1).clamp(max=h - 1)

    flat = frame.reshape(b, c, h * w)

    def gather(yi, xi):
        idx = (yi * w + xi).reshape(b, 1, h * w).expand(b, c, h * w)
        return flat.gather(2, idx).reshape(b, c, h, w)

    fx = fx.unsqueeze(1)
    fy = fy.unsqueeze(1)
    top = gather(y0, x0) * (1 - fx) + gather(y0, x1) * fx
    bot = gather(y1, x0) * (1 - fx) + gather(y1, x1) * fx
    return top * (1 - fy) + bot * fy


def warp_numpy(frame: np.ndarray, flow: np.ndarray) -> np.ndarray:
    """Convenience wrapper for (C, H, W) numpy inputs."""
    out = warp(torch.from_numpy(np.ascontiguousarray(frame))[None].double(),
               torch.from_numpy(np.ascontiguousarray(flow))[None].double())
    return out[0].numpy().astype(frame.dtype)
