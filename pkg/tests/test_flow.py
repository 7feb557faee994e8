import numpy as np
import pytest

from frvi.flow import (FlowEstimatorConfig, FlowMethod, compose_flows,
                       denormalize_flow, estimate_flow, long_range_flow,
                       normalize_flow)
from frvi.synth import synth_video
from frvi.types import VideoDataError
from frvi.warp import warp_numpy


def _textured(h=48, w=48, seed=0):
    from frvi.synth import _smooth_texture
    return _smooth_texture(np.random.default_rng(seed), 3, h, w, cell=4)


class TestEstimator:
    def test_same_frame_near_zero(self):
        a = _textured()
        flow = estimate_flow(a, a, FlowEstimatorConfig())
        assert np.abs(flow).mean() < 0.2

    def test_global_shift_recovered(self):
        # frame b is a translated by (+2, 0): true flow has fx = 2 in the
        # interior (our convention: warp(a, F) aligns with b)
        a = _textured(seed=1)
        b = np.roll(a, 2, axis=2)
        flow = estimate_flow(a, b, FlowEstimatorConfig())
        interior = flow[:, 8:-8, 8:-8]
        assert abs(interior[0].mean() - 2.0) < 0.5
        assert abs(interior[1].mean()) < 0.5

    def test_warp_residual_reduced(self):
        a = _textured(seed=2)
        b = np.roll(a, 1, axis=1)
        flow = estimate_flow(a, b, FlowEstimatorConfig())
        warped = warp_numpy(a, flow)
        before = np.abs(a - b)[:, 6:-6, 6:-6].mean()
        after = np.abs(warped - b)[:, 6:-6, 6:-6].mean()
        assert after < 0.3 * before

    def test_shape_mismatch(self):
        with pytest.raises(VideoDataError):
            estimate_flow(np.zeros((3, 16, 16), np.float32),
                          np.zeros((3, 32, 32), np.float32),
                          FlowEstimatorConfig())

    def test_ground_truth_passthrough(self):
        cfg = FlowEstimatorConfig(method=FlowMethod.GROUND_TRUTH)
        gt = np.ones((2, 16, 16), np.float32)
        a = np.zeros((3, 16, 16), np.float32)
        out = estimate_flow(a, a, cfg, gt=gt)
        np.testing.assert_array_equal(out, gt)
        with pytest.raises(VideoDataError):
            estimate_flow(a, a, cfg)

    def test_output_dtype_and_shape(self):
        a = _textured(32, 40)
        out = estimate_flow(a, a, FlowEstimatorConfig())
        assert out.shape == (2, 32, 40)
        assert out.dtype == np.float32


class TestNormalization:
    def test_round_trip(self):
        rng = np.random.default_rng(3)
        flow = (rng.random((2, 16, 16)) * 8 - 4).astype(np.float32)
        back = denormalize_flow(normalize_flow(flow))
        assert np.abs(back - flow).max() < 1e-6

    def test_range_is_minus_one_to_one(self):
        rng = np.random.default_rng(4)
        flow = (rng.random((2, 16, 16)) * 6 - 1).astype(np.float32)
        nf = normalize_flow(flow)
        assert nf.values[:2].min() == -1.0
        assert nf.values[:2].max() == 1.0
        assert nf.range_min == float(flow.min())
        assert nf.range_max == float(flow.max())

    def test_third_channel_is_mean(self):
        rng = np.random.default_rng(5)
        flow = (rng.random((2, 16, 16)) * 4 - 2).astype(np.float32)
        nf = normalize_flow(flow)
        assert nf.values.shape == (3, 16, 16)
        mean = nf.values[:2].mean(axis=0)
        assert np.abs(nf.values[2] - mean).max() < 1e-6

    def test_degenerate_constant_flow(self):
        flow = np.full((2, 8, 8), 1.5, np.float32)
        nf = normalize_flow(flow)
        assert (nf.values == 0.0).all()
        back = denormalize_flow(nf)
        np.testing.assert_allclose(back, flow)


class TestLongRange:
    def test_compose_constant_flows(self):
        # constant (1, 0) composed with constant (2, 0) gives (3, 0)
        f1 = np.zeros((2, 16, 16), np.float32)
        f1[0] = 1.0
        f2 = np.zeros((2, 16, 16), np.float32)
        f2[0] = 2.0
        out = compose_flows(f1, f2)
        interior = out[:, :, 3:]
        np.testing.assert_allclose(interior[0], 3.0, atol=1e-5)
        np.testing.assert_allclose(interior[1], 0.0, atol=1e-5)

    def test_same_index_is_zero(self):
        seq = synth_video(1, 4, 32, 32, seed=7)
        out = long_range_flow(seq, 2, 2, FlowEstimatorConfig())
        assert (out == 0.0).all()

    def test_composed_passthrough_matches_gt_chain(self):
        seq = synth_video(1, 4, 32, 32, seed=8)
        cfg = FlowEstimatorConfig(method=FlowMethod.GROUND_TRUTH)
        out = long_range_flow(seq, 2, 0, cfg, mode="composed")
        expect = compose_flows(seq.gt_flows[0], seq.gt_flows[1])
        np.testing.assert_allclose(out, expect, atol=1e-6)

    def test_passthrough_rejects_backward(self):
        seq = synth_video(1, 4, 32, 32, seed=8)
        cfg = FlowEstimatorConfig(method=FlowMethod.GROUND_TRUTH)
        with pytest.raises(VideoDataError):
            long_range_flow(seq, 0, 2, cfg, mode="composed")

    def test_direct_estimation_aligns_frames(self):
        seq = synth_video(1, 4, 48, 48, seed=9)
        flow = long_range_flow(seq, 3, 0, FlowEstimatorConfig(),
                               use_gt_frames=True)
        warped = warp_numpy(seq.gt_frames[0], flow)
        before = np.abs(seq.gt_frames[0] - seq.gt_frames[3]).mean()
        after = np.abs(warped - seq.gt_frames[3]).mean()
        assert after < before

    def test_bad_indices(self):
        seq = synth_video(1, 4, 32, 32, seed=7)
        with pytest.raises(VideoDataError):
            long_range_flow(seq, 9, 0, FlowEstimatorConfig())
        with pytest.raises(ValueError):
            long_range_flow(seq, 1, 0, FlowEstimatorConfig(), mode="sideways")
