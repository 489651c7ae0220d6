"""Small numpy neural-network engine: conv, max-pool, dense, BCE, Adam."""

from .gradcheck import max_relative_error, numerical_gradient, relative_errors
from .layers import (
    CNNBlock,
    Conv1D,
    Dense,
    FCN,
    MaxPool,
    bce_loss,
    conv_forward,
    dense_forward,
    max_pool,
    sigmoid,
)
from .optim import AdamState, adam_init, adam_step
from .params import ModelParams, ParamSpec, ParamsFormatError, init_params

__all__ = [
    "AdamState", "CNNBlock", "Conv1D", "Dense", "FCN", "MaxPool", "ModelParams", "ParamSpec",
    "ParamsFormatError", "adam_init", "adam_step", "bce_loss", "conv_forward", "dense_forward",
    "init_params", "max_pool", "max_relative_error", "numerical_gradient", "relative_errors", "sigmoid",
]
