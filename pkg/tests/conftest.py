"""Shared fixtures and the central finite-difference gradient checker."""

import numpy as np
import pytest
import torch

torch.set_num_threads(2)


@pytest.fixture(autouse=True)
def _seed_everything():
    np.random.seed(0)
    torch.manual_seed(0)


def fd_check(fn, tensors, n_coords=20, h=1e-5, rtol=1e-3, rng_seed=0):
    """Compare autograd gradients of scalar ``fn(*tensors)`` against central
    finite differences at ``n_coords`` random coordinates per tensor.

    Tensors must be double precision leaves with requires_grad=True.
    """
    rng = np.random.default_rng(rng_seed)
    out = fn(*tensors)
    grads = torch.autograd.grad(out, tensors, allow_unused=False)
    for t, g in zip(tensors, grads):
        flat = t.detach().reshape(-1)
        gflat = g.reshape(-1)
        coords = rng.choice(flat.numel(), size=min(n_coords, flat.numel()),
                            replace=False)
        for c in coords:
            orig = flat[c].item()
            with torch.no_grad():
                flat[c] = orig + h
                hi = float(fn(*tensors))
                flat[c] = orig - h
                lo = float(fn(*tensors))
                flat[c] = orig
            fd = (hi - lo) / (2 * h)
            an = float(gflat[c])
            denom = max(abs(fd), abs(an), 1e-6)
            assert abs(fd - an) / denom < rtol, (
                f"coord {c}: fd={fd:.8g} autograd={an:.8g}")


def rand_frame(h=16, w=16, c=3, batch=1, seed=0, dtype=torch.float64):
    gen = torch.Generator().manual_seed(seed)
    return torch.rand(batch, c, h, w, generator=gen, dtype=dtype)


def rand_mask(h=16, w=16, batch=1, seed=0, hole_frac=0.3, dtype=torch.float64):
    gen = torch.Generator().manual_seed(seed)
    return (torch.rand(batch, 1, h, w, generator=gen, dtype=dtype)
            < hole_frac).to(dtype)
