"""Shared helpers for gradient checks against finite differences."""

import numpy as np
import torch


def flatten_params(module):
    return torch.cat([p.detach().reshape(-1) for p in module.parameters()]).numpy()


def load_flat_params(module, flat):
    flat = torch.as_tensor(flat, dtype=torch.float64)
    offset = 0
    with torch.no_grad():
        for p in module.parameters():
            n = p.numel()
            p.copy_(flat[offset:offset + n].reshape(p.shape))
            offset += n


def analytic_grad(module, loss_fn):
    for p in module.parameters():
        p.grad = None
    loss = loss_fn(module)
    loss.backward()
    return torch.cat([p.grad.reshape(-1) for p in module.parameters()]).numpy()


def max_relative_error(analytic, numeric, floor=1e-6):
    denom = np.maximum(np.abs(analytic) + np.abs(numeric), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))
