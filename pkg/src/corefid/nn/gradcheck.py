"""Central finite-difference gradient checking."""

from __future__ import annotations

import numpy as np

from .params import ModelParams


def numerical_gradient(loss_fn, params: ModelParams, h: float = 1e-4, names=None) -> dict:
    """Central differences of `loss_fn(params)` with respect to every parameter component."""
    work = params.copy()
    out = {}
    for name in names or params.names:
        arr = work[name].reshape(-1)  # view into the working copy
        grad = np.zeros(arr.size)
        for i in range(arr.size):
            orig = arr[i]
            arr[i] = orig + h
            up = loss_fn(work)
            arr[i] = orig - h
            down = loss_fn(work)
            arr[i] = orig
            grad[i] = (up - down) / (2.0 * h)
        out[name] = grad.reshape(params[name].shape)
    return out


def relative_errors(analytic: dict, numeric: dict, floor: float = 1e-8) -> dict:
    """Per-block max of |a - n| / max(|a|, |n|, floor)."""
    res = {}
    for name, n in numeric.items():
        a = analytic[name]
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        res[name] = float(np.max(np.abs(a - n) / denom)) if n.size else 0.0
    return res


def max_relative_error(analytic: dict, numeric: dict, floor: float = 1e-8) -> float:
    errs = relative_errors(analytic, numeric, floor)
    return max(errs.values()) if errs else 0.0
