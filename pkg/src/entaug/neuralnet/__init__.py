"""Minimal differentiable-computation substrate for the translation network."""

from .gradcheck import grad_check, grad_check_sampled
from .layers import (
    adain,
    conv2d,
    conv_transpose2d,
    he_normal,
    instance_norm,
    linear,
)
from .optim import AdamState, adam_step
from .tensor import (
    Tensor,
    absolute,
    avg_pool2,
    channel_max,
    channel_min,
    channel_select,
    clamp,
    lrelu,
    reflect_pad_hw,
    relu,
    safe_div,
    slice_cols,
    sqrt_safe,
    stack_scalars,
    tanh,
    tensor,
)

__all__ = [
    "Tensor",
    "tensor",
    "absolute",
    "tanh",
    "relu",
    "lrelu",
    "sqrt_safe",
    "clamp",
    "safe_div",
    "channel_max",
    "channel_min",
    "channel_select",
    "slice_cols",
    "stack_scalars",
    "reflect_pad_hw",
    "avg_pool2",
    "conv2d",
    "conv_transpose2d",
    "instance_norm",
    "adain",
    "linear",
    "he_normal",
    "grad_check",
    "grad_check_sampled",
    "AdamState",
    "adam_step",
]
