"""Reverse-mode automatic differentiation on numpy arrays."""
from .gradcheck import grad_check
from .init import he_normal
from .ops import (
    abs,
    activation,
    add,
    as_tensor,
    bias_add,
    clip,
    concat,
    conv2d,
    conv_transpose2d,
    elementwise,
    leaky_relu,
    losses,
    matmul,
    mean,
    mul,
    power,
    relu,
    reshape,
    sigmoid,
    softmax,
    softmax_cross_entropy,
    softplus,
    sub,
    sum,
    take,
    tanh,
    transpose,
)
from .optim import AdamState, adam_step
from .tensor import Tape, Tensor, backward

__all__ = [
    "AdamState", "Tape", "Tensor", "abs", "activation", "adam_step", "add", "as_tensor", "backward",
    "bias_add", "clip", "concat", "conv2d", "conv_transpose2d", "elementwise", "grad_check",
    "he_normal", "leaky_relu", "losses", "matmul", "mean", "mul", "power", "relu", "reshape",
    "sigmoid", "softmax", "softmax_cross_entropy", "softplus", "sub", "sum", "take", "tanh",
    "transpose",
]
