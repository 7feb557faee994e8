import numpy as np
import pytest

from frvi.checkpoint import save_model
from frvi.cli import build_train_config, main, parse_config_file
from frvi.container import read_video, write_video
from frvi.model import PipelineConfig, VideoInpainter
from frvi.nets import UNetConfig
from frvi.synth import corrupt, synth_video
from frvi.train import Stage
from frvi.types import MaskKind, MaskSpec


def _small_checkpoint(tmp_path):
    model = VideoInpainter(PipelineConfig(
        unet=UNetConfig(depth=2, base_channels=4),
        refiner_base=4, refiner_hidden=4, blender_base=4))
    save_model(model, tmp_path / "ckpt")
    return tmp_path / "ckpt"


class TestConfigParsing:
    def test_key_value_with_comments(self, tmp_path):
        cfg = tmp_path / "train.cfg"
        cfg.write_text("steps = 12  # a comment\n\n# full line comment\n"
                       "learning_rate = 0.003\nlambda_d = 2.0\n")
        values = parse_config_file(cfg)
        assert values == {"steps": "12", "learning_rate": "0.003",
                          "lambda_d": "2.0"}

    def test_bad_line_rejected(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("steps neq 5\n")
        with pytest.raises(ValueError):
            parse_config_file(cfg)

    def test_build_train_config(self):
        cfg = build_train_config({"steps": "9", "learning_rate": "0.002",
                                  "lambda_d": "3.5", "stage": "main",
                                  "flow_detach": "false", "seed": "4"})
        assert cfg.steps == 9
        assert cfg.learning_rate == 0.002
        assert cfg.weights.lambda_d == 3.5
        assert cfg.stage is Stage.MAIN
        assert cfg.flow_detach is False
        assert cfg.seed == 4

    def test_unknown_key_rejected(self):
        with pytest.raises(ValueError):
            build_train_config({"nonsense": "1"})


class TestGenerateData:
    def test_writes_containers(self, tmp_path, capsys):
        rc = main(["generate-data", "--output", str(tmp_path / "data"),
                   "--num-videos", "2", "--frames", "3", "--size", "16",
                   "--shapes", "1", "--seed", "3"])
        assert rc == 0
        dirs = sorted((tmp_path / "data").iterdir())
        assert len(dirs) == 2
        seq = read_video(dirs[0])
        assert seq.num_frames == 3
        assert seq.gt_flows is not None


class TestInfer:
    def _write_input(self, tmp_path):
        seq = corrupt(synth_video(1, 3, 16, 16, seed=5),
                      MaskSpec(kind=MaskKind.FIXED_RECT, frame_size=16))
        write_video(seq, tmp_path / "in")
        return seq

    def test_success_exit_zero(self, tmp_path, capsys):
        self._write_input(tmp_path)
        ckpt = _small_checkpoint(tmp_path)
        rc = main(["infer", "--checkpoint", str(ckpt),
                   "--input", str(tmp_path / "in"),
                   "--output", str(tmp_path / "out")])
        assert rc == 0
        out = read_video(tmp_path / "out")
        assert out.num_frames == 3

    def test_missing_input_exit_two(self, tmp_path, capsys):
        ckpt = _small_checkpoint(tmp_path)
        rc = main(["infer", "--checkpoint", str(ckpt),
                   "--input", str(tmp_path / "nope"),
                   "--output", str(tmp_path / "out")])
        assert rc == 2

    def test_bad_checkpoint_exit_two(self, tmp_path, capsys):
        self._write_input(tmp_path)
        rc = main(["infer", "--checkpoint", str(tmp_path / "nope"),
                   "--input", str(tmp_path / "in"),
                   "--output", str(tmp_path / "out")])
        assert rc == 2

    def test_numeric_failure_exit_three(self, tmp_path, capsys):
        self._write_input(tmp_path)
        model = VideoInpainter(PipelineConfig(
            unet=UNetConfig(depth=2, base_channels=4),
            refiner_base=4, refiner_hidden=4, blender_base=4))
        import torch
        with torch.no_grad():
            model.hs.net.head.bias.fill_(float("nan"))
        save_model(model, tmp_path / "bad_ckpt")
        rc = main(["infer", "--checkpoint", str(tmp_path / "bad_ckpt"),
                   "--input", str(tmp_path / "in"),
                   "--output", str(tmp_path / "out")])
        assert rc == 3

    def test_mask_spec_argument(self, tmp_path, capsys):
        self._write_input(tmp_path)
        ckpt = _small_checkpoint(tmp_path)
        rc = main(["infer", "--checkpoint", str(ckpt),
                   "--input", str(tmp_path / "in"),
                   "--masks", "random_rect:9",
                   "--output", str(tmp_path / "out")])
        assert rc == 0


class TestTrainCommand:
    def test_single_stage_smoke(self, tmp_path, capsys):
        rc = main(["generate-data", "--output", str(tmp_path / "data"),
                   "--num-videos", "2", "--frames", "3", "--size", "16",
                   "--shapes", "1"])
        assert rc == 0
        rc = main(["train", "--data", str(tmp_path / "data"),
                   "--checkpoint", str(tmp_path / "ckpt"),
                   "--stage", "pretrain_frames", "--steps", "2"])
        assert rc == 0
        assert (tmp_path / "ckpt" / "manifest.json").is_file()

    def test_config_file_steps(self, tmp_path, capsys):
        main(["generate-data", "--output", str(tmp_path / "data"),
              "--num-videos", "2", "--frames", "3", "--size", "16",
              "--shapes", "1"])
        cfg = tmp_path / "t.cfg"
        cfg.write_text("steps = 2\nlearning_rate = 0.001\n")
        rc = main(["train", "--data", str(tmp_path / "data"),
                   "--checkpoint", str(tmp_path / "ckpt"),
                   "--stage", "pretrain_frames", "--config", str(cfg)])
        assert rc == 0


class TestEvaluateCommand:
    def test_csv_output(self, tmp_path, capsys):
        main(["generate-data", "--output", str(tmp_path / "data"),
              "--num-videos", "1", "--frames", "3", "--size", "16",
              "--shapes", "1"])
        ckpt = _small_checkpoint(tmp_path)
        rc = main(["evaluate", "--checkpoint", str(ckpt),
                   "--data", str(tmp_path / "data"), "--mask", "walker"])
        assert rc == 0
        out = capsys.readouterr().out.splitlines()
        assert out[-2] == "variant,mask_type,l1,warp_error,params,ms_per_frame"
        assert out[-1].startswith("ours,walker,")


class TestBenchCommand:
    def test_bench_smoke(self, tmp_path, capsys):
        ckpt = _small_checkpoint(tmp_path)
        rc = main(["bench", "--checkpoint", str(ckpt), "--frames", "3",
                   "--size", "16"])
        assert rc == 0
        assert "ms/frame" in capsys.readouterr().out
