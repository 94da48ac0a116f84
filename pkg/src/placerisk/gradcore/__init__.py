"""Minimal reverse-mode autodiff engine: tensors, ops, Adam, checkpoints."""

from .tensor import Tensor, Parameter, no_grad, grad_enabled, topo_order, collect_parameters
from .ops import (
    as_tensor,
    add,
    mul,
    tsum,
    reshape,
    concat,
    narrow,
    relu,
    sigmoid,
    tanh,
    activation,
    softmax,
    dense,
    conv2d,
    global_avg_pool,
    batch_norm,
    BatchNormState,
    softmax_cross_entropy,
)
from .optim import Adam, AdamState
from .checkpoint import save_checkpoint, load_checkpoint, restore_parameters
from .gradcheck import grad_check, finite_difference, relative_error

__all__ = [
    "Tensor",
    "Parameter",
    "no_grad",
    "grad_enabled",
    "topo_order",
    "collect_parameters",
    "as_tensor",
    "add",
    "mul",
    "tsum",
    "reshape",
    "concat",
    "narrow",
    "relu",
    "sigmoid",
    "tanh",
    "activation",
    "softmax",
    "dense",
    "conv2d",
    "global_avg_pool",
    "batch_norm",
    "BatchNormState",
    "softmax_cross_entropy",
    "Adam",
    "AdamState",
    "save_checkpoint",
    "load_checkpoint",
    "restore_parameters",
    "grad_check",
    "finite_difference",
    "relative_error",
]
