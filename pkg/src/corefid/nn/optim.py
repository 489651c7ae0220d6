"""Adam with bias correction, written as a pure step function."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import ModelParams

BETA1 = 0.9
BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0


def adam_init(params: ModelParams) -> AdamState:
    return AdamState(m=np.zeros_like(params.flat), v=np.zeros_like(params.flat), t=0)


def _flat_grads(params: ModelParams, grads) -> np.ndarray:
    if isinstance(grads, ModelParams):
        return grads.flat
    return np.concatenate([np.asarray(grads[name], dtype=np.float64).reshape(-1) for name in params])


def adam_step(params: ModelParams, grads, state: AdamState, lr: float = 1e-3,
              beta1: float = BETA1, beta2: float = BETA2, eps: float = ADAM_EPS):
    """Return (new params, new state); inputs are left untouched."""
    g = _flat_grads(params, grads)
    t = state.t + 1
    m = beta1 * state.m + (1.0 - beta1) * g
    v = beta2 * state.v + (1.0 - beta2) * (g * g)
    step = lr * (m / (1.0 - beta1 ** t)) / (np.sqrt(v / (1.0 - beta2 ** t)) + eps)
    return ModelParams.from_flat(params, params.flat - step), AdamState(m=m, v=v, t=t)
