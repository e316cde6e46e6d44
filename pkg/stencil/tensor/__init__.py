from .tensor import Tensor, as_tensor, no_grad, is_grad_enabled
from .ops import (
    matmul,
    softmax_lastdim,
    exp,
    log,
    sqrt,
    silu,
    layer_norm,
    conv2d,
    nearest_indices,
    nearest_resize,
    concatenate,
    take,
    masked_fill
)
from .nn import Parameter, Module, ModuleList
from .optim import DEFAULT_LR, Adam, AdamState, adam_step
from .gradcheck import gradcheck, numerical_gradient, relative_error


def backward(loss: Tensor):
    """Populate gradients of every requires-grad leaf of a scalar loss."""
    loss.backward()
