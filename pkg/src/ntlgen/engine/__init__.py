from .gradcheck import GradCheckReport, grad_check
from .ops import (
    ParamInit,
    RunningStats,
    activation,
    batch_norm,
    concat_channels,
    conv2d,
    conv_output_size,
    conv_transpose2d,
    conv_transpose_output_size,
    dropout,
    leaky_relu,
    relu,
    sigmoid,
    tanh,
)
from .optim import AdamState, adam_step
from .tensor import GradientTape, Tensor, backward, grad, tensor

__all__ = [
    "AdamState",
    "GradCheckReport",
    "GradientTape",
    "ParamInit",
    "RunningStats",
    "Tensor",
    "activation",
    "adam_step",
    "backward",
    "batch_norm",
    "concat_channels",
    "conv2d",
    "conv_output_size",
    "conv_transpose2d",
    "conv_transpose_output_size",
    "dropout",
    "grad",
    "grad_check",
    "leaky_relu",
    "relu",
    "sigmoid",
    "tanh",
    "tensor",
]
