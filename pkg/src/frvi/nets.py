"""Learnable components: partial convolution, the frame inpainter, the flow
completion and flow blending networks, the peephole ConvLSTM cell, the
recurrent refiner and the frozen perceptual feature pyramid.

Convention at every public boundary: masks passed in are HOLE masks
(1 = missing pixel). Partial convolutions internally work with the inverted
KNOWN mask (1 = valid); the inversion happens in the network adapters.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn


def partial_conv(x: torch.Tensor, known: torch.Tensor, weight: torch.Tensor,
                 bias: torch.Tensor | None = None, stride: int = 1,
                 padding: int = 0) -> tuple[torch.Tensor, torch.Tensor]:
    """Partial convolution over known pixels with window renormalization.

    ``known`` is (B, 1, H, W) with 1 = valid pixel. Output windows with no
    valid pixel are zero (bias suppressed); the returned updated mask is 1
    where at least one valid pixel was seen. Padding replicates the border
    validity, so a full mask reproduces a standard zero-padded convolution.
    """
    if weight.shape[2] > x.shape[2] or weight.shape[3] > x.shape[3]:
        raise ValueError("kernel larger than input")
    kh, kw = weight.shape[2], weight.shape[3]
    window = float(kh * kw)
    raw = F.conv2d(x * known, weight, None, stride=stride, padding=padding)
    ones = torch.ones(1, 1, kh, kw, dtype=x.dtype, device=x.device)
    if padding > 0:
        known_p = F.pad(known, (padding,) * 4, mode="replicate")
    else:
        known_p = known
    msum = F.conv2d(known_p, ones, None, stride=stride)
    valid = msum > 0
    ratio = torch.where(valid, window / msum.clamp(min=1e-12), torch.zeros_like(msum))
    out = raw * ratio
    if bias is not None:
        out = out + bias.view(1, -1, 1, 1)
    out = out * valid.to(x.dtype)
    return out, valid.to(x.dtype)


class PartialConv2d(nn.Module):
    """Module wrapper around :func:`partial_conv` with learnable weights."""

    def __init__(self, in_channels, out_channels, kernel_size, stride=1, padding=0):
        super().__init__()
        ref = nn.Conv2d(in_channels, out_channels, kernel_size)
        self.weight = nn.Parameter(ref.weight.detach().clone())
        self.bias = nn.Parameter(ref.bias.detach().clone())
        self.stride = stride
        self.padding = padding

    def forward(self, x, known):
        return partial_conv(x, known, self.weight, self.bias,
                            stride=self.stride, padding=self.padding)


@dataclass
class UNetConfig:
    depth: int = 3
    base_channels: int = 16
    skip_connections: bool = True

    def __post_init__(self):
        if not self.skip_connections:
            raise ValueError("skip connections are always enabled")
        if self.depth < 1:
            raise ValueError("depth must be >= 1")


class PConvUNet(nn.Module):
    """Encoder-decoder of partial convolutions with mask propagation and
    skip connections; the shared skeleton of the frame inpainter and the
    flow completion network."""

    def __init__(self, in_channels: int, out_channels: int, config: UNetConfig | None = None):
        super().__init__()
        self.config = config or UNetConfig()
        base = self.config.base_channels
        depth = self.config.depth
        enc_ch = [in_channels] + [base * (1 << d) for d in range(depth)]
        self.encoders = nn.ModuleList(
            PartialConv2d(enc_ch[d], enc_ch[d + 1], 3, stride=2, padding=1)
            for d in range(depth))
        self.decoders = nn.ModuleList()
        for d in reversed(range(depth)):
            skip = enc_ch[d]
            self.decoders.append(PartialConv2d(enc_ch[d + 1] + skip, max(skip, base), 3, padding=1))
        self.head = PartialConv2d(max(in_channels, base), out_channels, 3, padding=1)

    def forward(self, x, known):
        feats = [(x, known)]
        for enc in self.encoders:
            f, m = enc(*feats[-1])
            feats.append((F.leaky_relu(f, 0.2), m))
        y, m = feats[-1]
        for dec, (skip_f, skip_m) in zip(self.decoders, reversed(feats[:-1])):
            y = F.interpolate(y, scale_factor=2, mode="nearest")
            m = F.interpolate(m, scale_factor=2, mode="nearest")
            m = torch.max(m, skip_m)
            y, m = dec(torch.cat([y, skip_f], dim=1), m)
            y = F.leaky_relu(y, 0.2)
        y, _ = self.head(y, m)
        return y


class FrameInpainter(nn.Module):
    """Single-frame inpainting network: a partial-convolution U-Net with a
    bounded output and known-pixel compositing."""

    def __init__(self, config: UNetConfig | None = None):
        super().__init__()
        self.net = PConvUNet(3, 3, config)

    def forward(self, frame: torch.Tensor, hole: torch.Tensor) -> torch.Tensor:
        known = 1.0 - hole
        raw = torch.sigmoid(self.net(frame, known))
        return known * frame + hole * raw


class FlowCompleter(nn.Module):
    """Flow completion network operating in the normalized flow domain.

    Input is the 3-channel normalized flow plus a hole mask; output is the
    completed 2-channel normalized flow with known pixels composited back.
    Denormalization to pixel units is done by the caller with the instance
    range stored alongside the normalized flow.
    """

    def __init__(self, config: UNetConfig | None = None):
        super().__init__()
        self.net = PConvUNet(3, 2, config)

    def forward(self, nflow: torch.Tensor, hole: torch.Tensor) -> torch.Tensor:
        known = 1.0 - hole
        raw = torch.tanh(self.net(nflow, known))
        return known * nflow[:, :2] + hole * raw


class BlendUNet(nn.Module):
    """Residual network of the flow blender: three encoder and three decoder
    convolutions with skip connections, on channel-stacked flow pairs."""

    def __init__(self, base: int = 16):
        super().__init__()
        self.e1 = nn.Conv2d(4, base, 3, stride=2, padding=1)
        self.e2 = nn.Conv2d(base, base * 2, 3, stride=2, padding=1)
        self.e3 = nn.Conv2d(base * 2, base * 4, 3, stride=2, padding=1)
        self.d1 = nn.Conv2d(base * 4 + base * 2, base * 2, 3, padding=1)
        self.d2 = nn.Conv2d(base * 2 + base, base, 3, padding=1)
        self.d3 = nn.Conv2d(base + 4, 2, 3, padding=1)

    def forward(self, x):
        e1 = F.leaky_relu(self.e1(x), 0.2)
        e2 = F.leaky_relu(self.e2(e1), 0.2)
        e3 = F.leaky_relu(self.e3(e2), 0.2)
        y = F.interpolate(e3, scale_factor=2, mode="nearest")
        y = F.leaky_relu(self.d1(torch.cat([y, e2], dim=1)), 0.2)
        y = F.interpolate(y, scale_factor=2, mode="nearest")
        y = F.leaky_relu(self.d2(torch.cat([y, e1], dim=1)), 0.2)
        y = F.interpolate(y, scale_factor=2, mode="nearest")
        return self.d3(torch.cat([y, x], dim=1))


class FlowBlender(nn.Module):
    """Fuses the two candidate flows: output = (fp + fi + residual) / 2.

    The averaging and the additive structure are fixed; only the residual
    is learned.
    """

    def __init__(self, base: int = 16):
        super().__init__()
        self.net = BlendUNet(base)

    def residual(self, fp: torch.Tensor, fi: torch.Tensor) -> torch.Tensor:
        return self.net(torch.cat([fp, fi], dim=1))

    def forward(self, fp: torch.Tensor, fi: torch.Tensor) -> torch.Tensor:
        if fp.shape != fi.shape:
            raise ValueError("flow shapes must match")
        return 0.5 * (fp + fi + self.residual(fp, fi))


@dataclass
class ConvLSTMState:
    hidden: torch.Tensor
    cell: torch.Tensor


class ConvLSTMCell(nn.Module):
    """ConvLSTM cell with Hadamard peephole connections from the cell state.

    Peephole weights are per-channel (broadcast spatially) so the cell stays
    fully convolutional and size-agnostic. The forget-gate bias initializes
    to 1 to favour memory retention early in training.
    """

    def __init__(self, in_channels: int, hidden_channels: int, kernel_size: int = 3):
        super().__init__()
        self.hidden_channels = hidden_channels
        pad = kernel_size // 2
        self.conv_x = nn.Conv2d(in_channels, 4 * hidden_channels, kernel_size, padding=pad)
        self.conv_h = nn.Conv2d(hidden_channels, 4 * hidden_channels, kernel_size,
                                padding=pad, bias=False)
        self.w_ci = nn.Parameter(torch.zeros(hidden_channels, 1, 1))
        self.w_cf = nn.Parameter(torch.zeros(hidden_channels, 1, 1))
        self.w_co = nn.Parameter(torch.zeros(hidden_channels, 1, 1))
        with torch.no_grad():
            self.conv_x.bias[hidden_channels:2 * hidden_channels].fill_(1.0)

    def zero_state(self, batch: int, h: int, w: int, *, device=None, dtype=None) -> ConvLSTMState:
        kwargs = {"device": device, "dtype": dtype}
        shape = (batch, self.hidden_channels, h, w)
        return ConvLSTMState(hidden=torch.zeros(shape, **kwargs),
                             cell=torch.zeros(shape, **kwargs))

    def forward(self, x: torch.Tensor, state: ConvLSTMState) -> ConvLSTMState:
        if not torch.isfinite(x).all():
            raise ValueError("non-finite ConvLSTM input")
        xi, xf, xc, xo = self.conv_x(x).chunk(4, dim=1)
        hi, hf, hc, ho = self.conv_h(state.hidden).chunk(4, dim=1)
        i = torch.sigmoid(xi + hi + self.w_ci * state.cell)
        f = torch.sigmoid(xf + hf + self.w_cf * state.cell)
        c = f * state.cell + i * torch.tanh(xc + hc)
        o = torch.sigmoid(xo + ho + self.w_co * c)
        return ConvLSTMState(hidden=o * torch.tanh(c), cell=c)


class Refiner(nn.Module):
    """Recurrent refiner: encodes the previous output and the current
    inpainted frame separately, runs a ConvLSTM over the concatenated
    features and decodes a residual image added to the previous output."""

    STRIDE = 2

    def __init__(self, base: int = 16, hidden: int = 32):
        super().__init__()
        self.enc_prev = nn.Sequential(
            nn.Conv2d(3, base, 3, stride=2, padding=1), nn.LeakyReLU(0.2),
            nn.Conv2d(base, base, 3, padding=1), nn.LeakyReLU(0.2))
        self.enc_cur = nn.Sequential(
            nn.Conv2d(3, base, 3, stride=2, padding=1), nn.LeakyReLU(0.2),
            nn.Conv2d(base, base, 3, padding=1), nn.LeakyReLU(0.2))
        self.cell = ConvLSTMCell(2 * base, hidden)
        self.dec1 = nn.Conv2d(hidden, base, 3, padding=1)
        self.dec2 = nn.Conv2d(base, 3, 3, padding=1)

    def zero_state(self, batch: int, h: int, w: int, *, device=None, dtype=None) -> ConvLSTMState:
        return self.cell.zero_state(batch, h // self.STRIDE, w // self.STRIDE,
                                    device=device, dtype=dtype)

    def residual(self, o_prev, p_cur, state):
        feats = torch.cat([self.enc_prev(o_prev), self.enc_cur(p_cur)], dim=1)
        new_state = self.cell(feats, state)
        y = F.interpolate(new_state.hidden, scale_factor=self.STRIDE, mode="nearest")
        y = F.leaky_relu(self.dec1(y), 0.2)
        return self.dec2(y), new_state

    def forward(self, o_prev: torch.Tensor, p_cur: torch.Tensor,
                state: ConvLSTMState) -> tuple[torch.Tensor, ConvLSTMState, torch.Tensor]:
        if o_prev.shape != p_cur.shape:
            raise ValueError("frame shapes must match")
        r, new_state = self.residual(o_prev, p_cur, state)
        return (o_prev + r).clamp(0.0, 1.0), new_state, r


class FeaturePyramid(nn.Module):
    """Fixed (non-trainable) multi-scale convolutional feature extractor used
    by the perceptual loss. Pluggable: any callable returning a list of
    feature maps with strictly decreasing spatial size can substitute."""

    def __init__(self, levels: int = 3, base: int = 8, seed: int = 1234):
        super().__init__()
        gen = torch.Generator().manual_seed(seed)
        chans = [3] + [base * (1 << i) for i in range(levels)]
        self.kernels = []
        for i in range(levels):
            w = torch.randn(chans[i + 1], chans[i], 3, 3, generator=gen)
            w *= (2.0 / (chans[i] * 9)) ** 0.5
            self.register_buffer(f"w{i}", w)
            self.kernels.append(f"w{i}")

    def forward(self, frame: torch.Tensor) -> list[torch.Tensor]:
        feats = []
        y = frame
        for name in self.kernels:
            w = getattr(self, name)
            y = F.leaky_relu(F.conv2d(y, w.to(y.dtype), stride=2, padding=1), 0.2)
            feats.append(y)
        return feats


def count_params(module: nn.Module) -> int:
    """Exact trainable element count."""
    return sum(p.numel() for p in module.parameters() if p.requires_grad)
