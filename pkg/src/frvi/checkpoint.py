"""Checkpoints: a JSON manifest (architecture config, seed, step count) plus
one named float32 raster blob per tensor. Loading rejects shape mismatches
by tensor name; save -> load -> save is byte-identical."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch

from .container import ContainerError, read_raster, write_raster
from .model import PipelineConfig, VideoInpainter

MANIFEST = "manifest.json"


def _blob_name(tensor_name: str) -> str:
    return tensor_name.replace(".", "__") + ".raw"


def save_model(model: VideoInpainter, path: str | Path, step: int = 0,
               extra_arrays: dict[str, np.ndarray] | None = None,
               extra_meta: dict | None = None) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    tensors = {}
    for name, t in model.state_dict().items():
        arr = t.detach().cpu().numpy().astype(np.float32)
        tensors[name] = list(arr.shape)
        write_raster(path / _blob_name(name), arr)
    extras = {}
    for name, arr in (extra_arrays or {}).items():
        extras[name] = list(np.asarray(arr).shape)
        write_raster(path / _blob_name(name), np.asarray(arr, dtype=np.float32))
    manifest = {
        "format": "frvi-checkpoint-v1",
        "config": model.config.to_dict(),
        "seed": model.config.seed,
        "step": step,
        "tensors": {k: tensors[k] for k in sorted(tensors)},
        "extras": {k: extras[k] for k in sorted(extras)},
        "meta": extra_meta or {},
    }
    (path / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True))


def read_manifest(path: str | Path) -> dict:
    manifest_path = Path(path) / MANIFEST
    if not manifest_path.is_file():
        raise ContainerError(f"missing {MANIFEST} in {path}")
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("format") != "frvi-checkpoint-v1":
        raise ContainerError(f"unsupported checkpoint format {manifest.get('format')!r}")
    return manifest


def load_model(path: str | Path, expect_shape: tuple[int, int] | None = None):
    """Rebuild the model from a checkpoint; returns (model, manifest).

    ``expect_shape`` only validates divisibility of the intended frame size
    by the architecture stride (the model itself is size-agnostic).
    """
    path = Path(path)
    manifest = read_manifest(path)
    config = PipelineConfig.from_dict(manifest["config"])
    if expect_shape is not None:
        div = 1 << config.unet.depth
        h, w = expect_shape
        if h % div or w % div:
            raise ContainerError(f"frame size {h}x{w} not divisible by {div}")
    model = VideoInpainter(config)
    state = model.state_dict()
    loaded = {}
    for name, shape in manifest["tensors"].items():
        if name not in state:
            raise ContainerError(f"unknown tensor {name!r} in checkpoint")
        if list(state[name].shape) != shape:
            raise ContainerError(
                f"shape mismatch for {name!r}: checkpoint {shape}, model {list(state[name].shape)}")
        loaded[name] = torch.from_numpy(read_raster(path / _blob_name(name), tuple(shape)))
    missing = set(state) - set(loaded)
    if missing:
        raise ContainerError(f"checkpoint missing tensors: {sorted(missing)}")
    model.load_state_dict(loaded)
    return model, manifest


def load_extras(path: str | Path) -> dict[str, np.ndarray]:
    path = Path(path)
    manifest = read_manifest(path)
    return {name: read_raster(path / _blob_name(name), tuple(shape))
            for name, shape in manifest.get("extras", {}).items()}
