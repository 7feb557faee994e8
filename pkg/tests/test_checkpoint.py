import json

import numpy as np
import pytest
import torch

from frvi.checkpoint import load_extras, load_model, read_manifest, save_model
from frvi.container import ContainerError
from frvi.model import PipelineConfig, VideoInpainter
from frvi.nets import UNetConfig


def _model(seed=0, depth=2):
    cfg = PipelineConfig(unet=UNetConfig(depth=depth, base_channels=4),
                         refiner_base=4, refiner_hidden=4, blender_base=4,
                         seed=seed)
    return VideoInpainter(cfg)


def _dir_bytes(path):
    return {p.name: p.read_bytes() for p in sorted(path.iterdir())}


def test_save_load_restores_all_tensors(tmp_path):
    model = _model(seed=1)
    save_model(model, tmp_path / "ckpt", step=42)
    loaded, manifest = load_model(tmp_path / "ckpt")
    assert manifest["step"] == 42
    for name, t in model.state_dict().items():
        assert torch.equal(loaded.state_dict()[name], t)


def test_save_load_save_byte_identical(tmp_path):
    model = _model(seed=2)
    save_model(model, tmp_path / "a", step=7)
    loaded, _ = load_model(tmp_path / "a")
    save_model(loaded, tmp_path / "b", step=7)
    assert _dir_bytes(tmp_path / "a") == _dir_bytes(tmp_path / "b")


def test_config_restored(tmp_path):
    model = _model(seed=3)
    save_model(model, tmp_path / "ckpt")
    loaded, _ = load_model(tmp_path / "ckpt")
    assert loaded.config.to_dict() == model.config.to_dict()


def test_missing_tensor_rejected(tmp_path):
    model = _model()
    save_model(model, tmp_path / "ckpt")
    mpath = tmp_path / "ckpt" / "manifest.json"
    manifest = json.loads(mpath.read_text())
    name = next(iter(manifest["tensors"]))
    del manifest["tensors"][name]
    mpath.write_text(json.dumps(manifest))
    with pytest.raises(ContainerError):
        load_model(tmp_path / "ckpt")


def test_shape_mismatch_rejected_by_name(tmp_path):
    model = _model()
    save_model(model, tmp_path / "ckpt")
    mpath = tmp_path / "ckpt" / "manifest.json"
    manifest = json.loads(mpath.read_text())
    name = next(iter(manifest["tensors"]))
    manifest["tensors"][name] = [1, 1, 1, 1]
    mpath.write_text(json.dumps(manifest))
    with pytest.raises(ContainerError, match=name.split(".")[0]):
        load_model(tmp_path / "ckpt")


def test_unknown_tensor_rejected(tmp_path):
    model = _model()
    save_model(model, tmp_path / "ckpt")
    mpath = tmp_path / "ckpt" / "manifest.json"
    manifest = json.loads(mpath.read_text())
    manifest["tensors"]["bogus.weight"] = [2, 2]
    mpath.write_text(json.dumps(manifest))
    with pytest.raises(ContainerError):
        load_model(tmp_path / "ckpt")


def test_wrong_format_rejected(tmp_path):
    model = _model()
    save_model(model, tmp_path / "ckpt")
    mpath = tmp_path / "ckpt" / "manifest.json"
    manifest = json.loads(mpath.read_text())
    manifest["format"] = "other"
    mpath.write_text(json.dumps(manifest))
    with pytest.raises(ContainerError):
        read_manifest(tmp_path / "ckpt")


def test_expect_shape_divisibility(tmp_path):
    model = _model(depth=3)
    save_model(model, tmp_path / "ckpt")
    load_model(tmp_path / "ckpt", expect_shape=(32, 32))
    with pytest.raises(ContainerError):
        load_model(tmp_path / "ckpt", expect_shape=(30, 32))


def test_extras_round_trip(tmp_path):
    model = _model()
    arrays = {"adam_m.hs.w": np.arange(6, dtype=np.float32).reshape(2, 3)}
    save_model(model, tmp_path / "ckpt", extra_arrays=arrays,
               extra_meta={"stage": "main"})
    extras = load_extras(tmp_path / "ckpt")
    np.testing.assert_array_equal(extras["adam_m.hs.w"], arrays["adam_m.hs.w"])
    assert read_manifest(tmp_path / "ckpt")["meta"]["stage"] == "main"


def test_loaded_model_same_outputs(tmp_path):
    model = _model(seed=4)
    save_model(model, tmp_path / "ckpt")
    loaded, _ = load_model(tmp_path / "ckpt")
    x = torch.rand(1, 3, 16, 16, generator=torch.Generator().manual_seed(0))
    hole = torch.zeros(1, 1, 16, 16)
    hole[0, 0, 4:8, 4:8] = 1.0
    with torch.no_grad():
        a = model.hs(x * (1 - hole), hole)
        b = loaded.hs(x * (1 - hole), hole)
    assert torch.equal(a, b)
