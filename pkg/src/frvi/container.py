"""Native on-disk container: a directory of per-frame raster files plus a
JSON manifest. Rasters are little-endian float32, row-major, channel-first;
the same raster codec backs checkpoints. Round-trips are bit-exact."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .types import VideoDataError, VideoSequence

MANIFEST = "manifest.json"


class ContainerError(VideoDataError):
    """Corrupt or inconsistent container contents."""


def write_raster(path: Path, array: np.ndarray) -> None:
    array = np.ascontiguousarray(array, dtype="<f4")
    path.write_bytes(array.tobytes())


def read_raster(path: Path, shape: tuple[int, ...]) -> np.ndarray:
    data = path.read_bytes()
    expected = int(np.prod(shape)) * 4
    if len(data) != expected:
        raise ContainerError(f"{path.name}: expected {expected} bytes, found {len(data)}")
    return np.frombuffer(data, dtype="<f4").reshape(shape).copy()


def write_video(seq: VideoSequence, path: str | Path) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    h, w = seq.frame_shape
    manifest = {
        "format": "frvi-video-v1",
        "num_frames": seq.num_frames,
        "height": h,
        "width": w,
        "channels": 3,
        "has_masks": True,
        "has_gt_frames": seq.gt_frames is not None,
        "has_gt_flows": seq.gt_flows is not None,
    }
    (path / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True))
    for t in range(seq.num_frames):
        write_raster(path / f"frame_{t:05d}.raw", seq.frames[t])
        write_raster(path / f"mask_{t:05d}.raw", seq.masks[t])
        if seq.gt_frames is not None:
            write_raster(path / f"gt_{t:05d}.raw", seq.gt_frames[t])
        if seq.gt_flows is not None and t < seq.num_frames - 1:
            write_raster(path / f"flow_{t:05d}.raw", seq.gt_flows[t])


def read_video(path: str | Path) -> VideoSequence:
    path = Path(path)
    manifest_path = path / MANIFEST
    if not manifest_path.is_file():
        raise ContainerError(f"missing {MANIFEST} in {path}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise ContainerError(f"corrupt manifest in {path}: {exc}") from exc
    if manifest.get("format") != "frvi-video-v1":
        raise ContainerError(f"unsupported container format {manifest.get('format')!r}")
    if manifest.get("channels") != 3:
        raise ContainerError(f"unsupported channel count {manifest.get('channels')!r}")
    t_total = manifest["num_frames"]
    h, w = manifest["height"], manifest["width"]
    frames = [read_raster(path / f"frame_{t:05d}.raw", (3, h, w)) for t in range(t_total)]
    masks = [read_raster(path / f"mask_{t:05d}.raw", (1, h, w)) for t in range(t_total)]
    gt_frames = None
    if manifest.get("has_gt_frames"):
        gt_frames = [read_raster(path / f"gt_{t:05d}.raw", (3, h, w)) for t in range(t_total)]
    gt_flows = None
    if manifest.get("has_gt_flows"):
        gt_flows = [read_raster(path / f"flow_{t:05d}.raw", (2, h, w)) for t in range(t_total - 1)]
    return VideoSequence(frames=frames, masks=masks, gt_frames=gt_frames, gt_flows=gt_flows)


def import_image_sequence(paths: list[str | Path]) -> list[np.ndarray]:
    """Import 8-bit image files as frames scaled to [0, 1] (optional helper)."""
    from PIL import Image

    frames = []
    for p in paths:
        img = np.asarray(Image.open(p).convert("RGB"), dtype=np.float32) / 255.0
        frames.append(np.ascontiguousarray(img.transpose(2, 0, 1)))
    return frames
