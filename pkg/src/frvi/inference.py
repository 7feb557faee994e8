"""Streaming inference: consumes one frame at a time with bounded retained
state (previous input, previous inpainted frame, previous output, ConvLSTM
state), for arbitrary stream length. Streaming outputs are bit-identical to
batch processing of the same clip because both run the same per-step ops."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .checkpoint import load_model
from .model import VideoInpainter, to_array, to_tensor
from .types import VideoDataError, validate_frame, validate_mask


class NumericError(RuntimeError):
    """Non-finite intermediate value, tagged with the pipeline stage."""

    def __init__(self, stage: str):
        super().__init__(f"non-finite values produced at stage {stage!r}")
        self.stage = stage


def _check_finite(t: torch.Tensor, stage: str) -> torch.Tensor:
    if not torch.isfinite(t).all():
        raise NumericError(stage)
    return t


@dataclass
class StreamSession:
    """Holds the loaded model and the single-frame recurrence state."""

    model: VideoInpainter
    frame_shape: tuple[int, int]
    o_prev: torch.Tensor | None = None
    i_prev: torch.Tensor | None = None
    p_prev: torch.Tensor | None = None
    m_prev: torch.Tensor | None = None
    state: object = None
    frames_processed: int = 0
    push_times: list = field(default_factory=list)

    def retained_elements(self) -> tuple[int, int]:
        """(number of retained arrays, total retained elements). Constant in
        stream position once the recurrence is warm."""
        tensors = [self.o_prev, self.i_prev, self.p_prev, self.m_prev]
        if self.state is not None:
            tensors += [self.state.hidden, self.state.cell]
        tensors = [t for t in tensors if t is not None]
        return len(tensors), sum(t.numel() for t in tensors)


def open_session(checkpoint: str | Path | VideoInpainter,
                 height: int, width: int) -> StreamSession:
    """Open a streaming session for frames of the given size.

    ``checkpoint`` is a checkpoint directory or an already-built model.
    Sessions opened from the same checkpoint share nothing mutable.
    """
    if isinstance(checkpoint, VideoInpainter):
        model = checkpoint
    else:
        model, _ = load_model(checkpoint, expect_shape=(height, width))
    div = 1 << model.config.unet.depth
    if height % div or width % div:
        raise VideoDataError(
            f"frame size {height}x{width} not divisible by {div}; pad the "
            f"input explicitly (implicit padding would change hole geometry)")
    model.eval()
    return StreamSession(model=model, frame_shape=(height, width))


def push_frame(session: StreamSession, frame: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Feed one (frame, mask) pair; returns the completed frame.

    Per-step computation: inpaint the frame; from the second frame on,
    generate both flow branches and their blend, then run the recurrent
    refiner on (previous output, inpainted frame). The first frame's output
    is the inpainted frame itself.
    """
    frame = validate_frame(frame, session.model.config.unet.depth)
    mask = validate_mask(mask, frame.shape[1:])
    if frame.shape[1:] != session.frame_shape:
        raise VideoDataError(
            f"frame shape {frame.shape[1:]} drifted from session {session.frame_shape}")
    model = session.model
    t0 = time.perf_counter()
    with torch.no_grad():
        i_cur = to_tensor(frame)
        m_cur = to_tensor(mask)
        t = session.frames_processed
        p_cur = _check_finite(model.inpaint_frame(i_cur, m_cur, index=t), "frame_inpaint")
        if t == 0:
            o_cur = model.composite(p_cur, i_cur, m_cur)
            b, _, h, w = i_cur.shape
            session.state = model.ht.zero_state(b, h, w, dtype=i_cur.dtype)
        else:
            _blended, _fp, _fi = model.robust_flow(
                session.p_prev, p_cur, session.i_prev, i_cur, session.m_prev, m_cur)
            _check_finite(_blended, "flow_blend")
            o_cur, session.state = model.refine_step(
                session.o_prev, p_cur, i_cur, m_cur, session.state)
            _check_finite(o_cur, "refine")
        session.o_prev = o_cur
        session.i_prev = i_cur
        session.p_prev = p_cur
        session.m_prev = m_cur
        session.frames_processed += 1
    session.push_times.append(time.perf_counter() - t0)
    return to_array(o_cur)


def process_sequence(session: StreamSession, frames, masks) -> list[np.ndarray]:
    return [push_frame(session, f, m) for f, m in zip(frames, masks)]


@dataclass
class BenchmarkReport:
    frames: int
    mean_ms: float | None
    median_ms: float | None
    per_frame_ms: list

    def format(self) -> str:
        if not self.frames:
            return "no frames processed"
        return (f"{self.frames} frames: mean {self.mean_ms:.2f} ms/frame, "
                f"median {self.median_ms:.2f} ms/frame")


def benchmark(session: StreamSession, frames, masks, n_frames: int | None = None) -> BenchmarkReport:
    """Time ``push_frame`` over a stream, excluding I/O and setup."""
    times = []
    for idx, (f, m) in enumerate(zip(frames, masks)):
        if n_frames is not None and idx >= n_frames:
            break
        t0 = time.perf_counter()
        push_frame(session, f, m)
        times.append((time.perf_counter() - t0) * 1000.0)
    if not times:
        return BenchmarkReport(frames=0, mean_ms=None, median_ms=None, per_frame_ms=[])
    return BenchmarkReport(frames=len(times), mean_ms=float(np.mean(times)),
                           median_ms=float(np.median(times)), per_frame_ms=times)
