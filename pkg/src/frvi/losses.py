"""Training objectives: masked spatial l1, perceptual distance, forward and
reverse short-term warp losses, long-term anchor losses, flow supervision,
and their weighted aggregate.

Every sum is normalized by the count of contributing elements so the loss
weights stay scale-free across resolutions. Temporal losses treat the flow
as an input by default (detached): the flow branch is trained by the flow
loss alone unless ``detach_flow=False`` is requested.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch

from .warp import warp


@dataclass
class LossWeights:
    """Defaults keep the spatial/temporal-pixel group to flow/perceptual/long
    group at a 10:1 ratio."""

    lambda_s: float = 10.0
    lambda_d: float = 10.0
    lambda_r: float = 10.0
    lambda_f: float = 1.0
    lambda_p: float = 1.0
    lambda_l: float = 1.0

    def __post_init__(self):
        for name, val in self.__dict__.items():
            if val < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass
class LossReport:
    spatial: float = 0.0        # L_d
    perceptual: float = 0.0     # L_p
    short_term: float = 0.0     # L_s
    reverse: float = 0.0        # L_r
    long_term: float = 0.0      # L_l
    flow: float = 0.0           # L_f
    total: float = 0.0
    masked_elements: dict = field(default_factory=dict)

    FIELDS = ("spatial", "perceptual", "short_term", "reverse", "long_term", "flow")

    def format_line(self, step: int) -> str:
        vals = " ".join(f"{name}={getattr(self, name):.6g}" for name in self.FIELDS)
        return f"step={step} {vals} total={self.total:.6g}"


def _zero(ref: torch.Tensor) -> torch.Tensor:
    return torch.zeros((), dtype=ref.dtype, device=ref.device)


def _masked_l1_sum(pairs) -> tuple[torch.Tensor, float]:
    """Sum of mask-weighted absolute differences and the element count."""
    total = None
    count = 0.0
    for a, b, m in pairs:
        if a.shape != b.shape or m.shape[-2:] != a.shape[-2:]:
            raise ValueError("shape mismatch in masked l1")
        term = (m * (a - b).abs()).sum()
        total = term if total is None else total + term
        count += float(m.sum().item()) * a.shape[1]
    if total is None:
        raise ValueError("empty sequence")
    return total, count


def _normalized(total: torch.Tensor, count: float) -> torch.Tensor:
    if count <= 0:
        return _zero(total)
    return total / count


def loss_d(outputs: list, gts: list, masks: list) -> torch.Tensor:
    """Masked per-pixel l1 between outputs and ground truth (hole regions)."""
    if not (len(outputs) == len(gts) == len(masks)):
        raise ValueError("sequence length mismatch")
    total, count = _masked_l1_sum(zip(outputs, gts, masks))
    return _normalized(total, count)


def loss_p(outputs: list, gts: list, extractor) -> torch.Tensor:
    """Mean over pyramid levels of the per-element l1 feature distance."""
    if len(outputs) != len(gts):
        raise ValueError("sequence length mismatch")
    acc = None
    n_levels = None
    for o, g in zip(outputs, gts):
        fo = extractor(o)
        fg = extractor(g)
        n_levels = len(fo)
        for lo, lg in zip(fo, fg):
            term = (lo - lg).abs().mean()
            acc = term if acc is None else acc + term
    return acc / n_levels


def loss_short(outputs: list, flows: list, masks: list,
               detach_flow: bool = True) -> torch.Tensor:
    """Forward short-term warp loss: each output warped onto its successor."""
    if len(flows) != len(outputs) - 1 or len(masks) != len(outputs):
        raise ValueError("sequence length mismatch")
    pairs = []
    for t in range(1, len(outputs)):
        f = flows[t - 1].detach() if detach_flow else flows[t - 1]
        pairs.append((outputs[t], warp(outputs[t - 1], f), masks[t]))
    total, count = _masked_l1_sum(pairs)
    return _normalized(total, count)


def loss_reverse(outputs: list, reverse_flows: list, masks: list,
                 detach_flow: bool = True) -> torch.Tensor:
    """Short-term warp loss on the reversed sequence with reverse flows."""
    return loss_short(list(reversed(outputs)), reverse_flows,
                      list(reversed(masks)), detach_flow=detach_flow)


def loss_long(outputs: list, flows_to_first: list, flows_to_last: list,
              masks: list, detach_flow: bool = True) -> torch.Tensor:
    """Long-term warp loss against the first and last output frames."""
    n = len(outputs)
    if len(flows_to_first) != n or len(flows_to_last) != n or len(masks) != n:
        raise ValueError("sequence length mismatch")
    pairs = []
    for t in range(n):
        ff = flows_to_first[t].detach() if detach_flow else flows_to_first[t]
        fl = flows_to_last[t].detach() if detach_flow else flows_to_last[t]
        pairs.append((outputs[0], warp(outputs[t], ff), masks[t]))
        pairs.append((outputs[-1], warp(outputs[t], fl), masks[t]))
    total, count = _masked_l1_sum(pairs)
    return _normalized(total, count)


def loss_flow(flows: list, gt_flows: list) -> torch.Tensor:
    """Mean per-element l1 between predicted and ground-truth flows."""
    if len(flows) != len(gt_flows):
        raise ValueError("sequence length mismatch")
    acc = None
    count = 0
    for f, g in zip(flows, gt_flows):
        if f.shape != g.shape:
            raise ValueError("flow shape mismatch")
        term = (f - g).abs().sum()
        acc = term if acc is None else acc + term
        count += f.numel()
    return acc / count


def total_loss(outputs: list, gts: list, masks: list, *,
               flows: list | None = None,
               gt_flows: list | None = None,
               reverse_flows: list | None = None,
               flows_to_first: list | None = None,
               flows_to_last: list | None = None,
               extractor=None,
               weights: LossWeights | None = None,
               detach_flow: bool = True) -> tuple[torch.Tensor, LossReport]:
    """Compute all enabled terms and the weighted total.

    A term is skipped (contributes 0) when its weight is zero or its inputs
    are not supplied.
    """
    w = weights or LossWeights()
    zero = _zero(outputs[0])
    terms = {}
    terms["spatial"] = loss_d(outputs, gts, masks) if w.lambda_d > 0 else zero
    terms["perceptual"] = (loss_p(outputs, gts, extractor)
                           if w.lambda_p > 0 and extractor is not None else zero)
    terms["short_term"] = (loss_short(outputs, flows, masks, detach_flow)
                           if w.lambda_s > 0 and flows is not None else zero)
    terms["reverse"] = (loss_reverse(outputs, reverse_flows, masks, detach_flow)
                        if w.lambda_r > 0 and reverse_flows is not None else zero)
    terms["long_term"] = (loss_long(outputs, flows_to_first, flows_to_last, masks, detach_flow)
                          if w.lambda_l > 0 and flows_to_first is not None
                          and flows_to_last is not None else zero)
    terms["flow"] = (loss_flow(flows, gt_flows)
                     if w.lambda_f > 0 and flows is not None and gt_flows is not None else zero)
    lam = {"spatial": w.lambda_d, "perceptual": w.lambda_p, "short_term": w.lambda_s,
           "reverse": w.lambda_r, "long_term": w.lambda_l, "flow": w.lambda_f}
    total = sum(lam[k] * terms[k] for k in terms)
    counts = {"masked_pixels": float(sum(m.sum().item() for m in masks))}
    report = LossReport(total=float(total.item()), masked_elements=counts,
                        **{k: float(v.item()) for k, v in terms.items()})
    return total, report
