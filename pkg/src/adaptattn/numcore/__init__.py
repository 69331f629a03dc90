"""Minimal dense tensors with reverse-mode gradients."""

from adaptattn.numcore.container import load_tensors, save_tensors
from adaptattn.numcore.gradcheck import grad_check
from adaptattn.numcore.ops import (
    add,
    add_constant,
    embedding,
    layer_norm,
    linear,
    log,
    masked_mean,
    matmul,
    mean,
    mul,
    relu,
    reshape,
    scale,
    softmax,
    sub,
    take_along,
    transpose,
)
from adaptattn.numcore.ops import sum as tsum
from adaptattn.numcore.tensor import GradTape, Tensor, backward, constant, parameter

__all__ = [
    "GradTape",
    "Tensor",
    "add",
    "add_constant",
    "backward",
    "constant",
    "embedding",
    "grad_check",
    "layer_norm",
    "linear",
    "load_tensors",
    "log",
    "masked_mean",
    "matmul",
    "mean",
    "mul",
    "parameter",
    "relu",
    "reshape",
    "save_tensors",
    "scale",
    "softmax",
    "sub",
    "take_along",
    "transpose",
    "tsum",
]
