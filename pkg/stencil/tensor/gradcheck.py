import typing as t

import numpy as np

from .tensor import Tensor


def numerical_gradient(
    loss: t.Callable[[], Tensor],
    tensor: Tensor,
    index: t.Tuple[int, ...],
    step: float = 1e-5
) -> float:
    """Central finite difference of loss() w.r.t. one entry of tensor."""
    original = tensor.data[index]
    tensor.data[index] = original + step
    plus = loss().item()
    tensor.data[index] = original - step
    minus = loss().item()
    tensor.data[index] = original
    return (plus - minus) / (2.0 * step)


def relative_error(analytic: float, numeric: float, floor: float = 1e-6) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def gradcheck(
    loss: t.Callable[[], Tensor],
    tensors: t.Sequence[Tensor],
    coordinates: int = None,
    rng: np.random.Generator = None,
    step: float = 1e-5
) -> float:
    """Compare reverse-mode gradients with central differences.

    :param loss: Rebuilds the scalar loss from the current tensor values.
    :param tensors: Leaves to check; each must require grad.
    :param coordinates: Number of random entries per tensor, all entries when None.
    :param rng: Chooses the entries when coordinates is set.
    :return: The largest relative error seen.
    """
    for tensor in tensors:
        tensor.zero_grad()
    loss().backward()
    analytic = [np.zeros_like(tensor.data) if tensor.grad is None else tensor.grad.copy() for tensor in tensors]

    worst = 0.0
    for tensor, grad in zip(tensors, analytic):
        indices = list(np.ndindex(tensor.shape))
        if coordinates is not None and coordinates < len(indices):
            rng = rng or np.random.default_rng(0)
            indices = [indices[i] for i in rng.choice(len(indices), size=coordinates, replace=False)]
        for index in indices:
            numeric = numerical_gradient(loss, tensor, index, step)
            worst = max(worst, relative_error(grad[index], numeric))
    return worst
