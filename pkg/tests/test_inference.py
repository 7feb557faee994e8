import numpy as np
import pytest
import torch

from frvi.checkpoint import save_model
from frvi.inference import (BenchmarkReport, NumericError, benchmark,
                            open_session, process_sequence, push_frame)
from frvi.model import PipelineConfig, VideoInpainter, to_tensor
from frvi.nets import UNetConfig
from frvi.synth import corrupt, synth_video
from frvi.types import MaskKind, MaskSpec, VideoDataError


def _model(seed=0):
    return VideoInpainter(PipelineConfig(
        unet=UNetConfig(depth=2, base_channels=4),
        refiner_base=4, refiner_hidden=4, blender_base=4, seed=seed))


@pytest.fixture(scope="module")
def seq():
    clean = synth_video(1, 6, 16, 16, seed=1)
    return corrupt(clean, MaskSpec(kind=MaskKind.FIXED_RECT, frame_size=16))


class TestSession:
    def test_open_from_model_and_checkpoint(self, tmp_path):
        model = _model()
        save_model(model, tmp_path / "ckpt")
        a = open_session(model, 16, 16)
        b = open_session(tmp_path / "ckpt", 16, 16)
        assert a.frame_shape == b.frame_shape == (16, 16)

    def test_indivisible_size_rejected_with_padding_hint(self):
        with pytest.raises(VideoDataError, match="pad"):
            open_session(_model(), 18, 16)

    def test_sessions_share_nothing(self, seq):
        model = _model()
        a = open_session(model, 16, 16)
        b = open_session(model, 16, 16)
        out_a1 = [push_frame(a, f, m) for f, m in
                  zip(seq.frames[:3], seq.masks[:3])]
        # interleave a second stream; first stream must be unaffected
        a2 = open_session(model, 16, 16)
        out_a2 = []
        for f, m in zip(seq.frames[:3], seq.masks[:3]):
            out_a2.append(push_frame(a2, f, m))
            push_frame(b, seq.frames[0], seq.masks[0])
        for x, y in zip(out_a1, out_a2):
            np.testing.assert_array_equal(x, y)


class TestStreaming:
    def test_streaming_equals_batch_bit_exact(self, seq):
        model = _model(seed=2)
        session = open_session(model, 16, 16)
        stream_out = process_sequence(session, seq.frames, seq.masks)
        frames = [to_tensor(f) for f in seq.frames]
        masks = [to_tensor(m) for m in seq.masks]
        with torch.no_grad():
            batch_out, _ = model.process_clip(frames, masks)
        for s, b in zip(stream_out, batch_out):
            np.testing.assert_array_equal(s, b.numpy()[0])

    def test_hole_free_stream_is_identity(self):
        model = _model()
        clean = synth_video(1, 4, 16, 16, seed=3)
        session = open_session(model, 16, 16)
        outs = process_sequence(session, clean.frames, clean.masks)
        for o, f in zip(outs, clean.frames):
            np.testing.assert_array_equal(o, f)

    def test_known_pixels_preserved(self, seq):
        session = open_session(_model(), 16, 16)
        outs = process_sequence(session, seq.frames, seq.masks)
        for o, f, m in zip(outs, seq.frames, seq.masks):
            known = m[0] == 0
            np.testing.assert_array_equal(o[:, known], f[:, known])

    def test_bounded_state(self, seq):
        session = open_session(_model(), 16, 16)
        push_frame(session, seq.frames[0], seq.masks[0])
        push_frame(session, seq.frames[1], seq.masks[1])
        after_two = session.retained_elements()
        for _ in range(20):
            push_frame(session, seq.frames[2], seq.masks[2])
        assert session.retained_elements() == after_two
        count, elements = after_two
        assert count == 6  # o/i/p/m previous + ConvLSTM hidden and cell
        assert elements > 0

    def test_shape_drift_rejected(self, seq):
        session = open_session(_model(), 16, 16)
        push_frame(session, seq.frames[0], seq.masks[0])
        big = np.zeros((3, 32, 32), dtype=np.float32)
        with pytest.raises(VideoDataError):
            push_frame(session, big, np.zeros((1, 32, 32), dtype=np.float32))

    def test_invalid_frame_rejected(self, seq):
        session = open_session(_model(), 16, 16)
        bad = seq.frames[0].copy()
        bad[0, 0, 0] = 2.0
        with pytest.raises(VideoDataError):
            push_frame(session, bad, seq.masks[0])

    def test_numeric_error_tagged_with_stage(self, seq):
        model = _model()
        with torch.no_grad():
            # poison the inpainter head so its output is non-finite
            model.hs.net.head.bias.fill_(float("nan"))
        session = open_session(model, 16, 16)
        with pytest.raises(NumericError) as err:
            push_frame(session, seq.frames[0], seq.masks[0])
        assert err.value.stage == "frame_inpaint"


class TestBenchmark:
    def test_empty_stream(self):
        session = open_session(_model(), 16, 16)
        report = benchmark(session, [], [])
        assert report.frames == 0
        assert report.mean_ms is None
        assert report.format() == "no frames processed"

    def test_reports_times(self, seq):
        session = open_session(_model(), 16, 16)
        report = benchmark(session, seq.frames, seq.masks, n_frames=3)
        assert report.frames == 3
        assert len(report.per_frame_ms) == 3
        assert report.mean_ms > 0
        assert "3 frames" in report.format()

    def test_n_frames_cap(self, seq):
        session = open_session(_model(), 16, 16)
        report = benchmark(session, seq.frames, seq.masks, n_frames=2)
        assert report.frames == 2
