import typing as t

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..exceptions import DimensionError, MaskedRowError, TrainingDivergenceError
from .tensor import Tensor, as_tensor, unbroadcast


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product over the last two axes; leading axes broadcast.

    :raises DimensionError: If the inner extents or the batch extents disagree.
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise DimensionError(f'matmul needs at least 2-D operands, got {a.shape} and {b.shape}.')
    if a.shape[-1] != b.shape[-2]:
        raise DimensionError(f'Cannot multiply {a.shape} by {b.shape}.')
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError as ex:
        raise DimensionError(f'Batch extents {a.shape[:-2]} and {b.shape[:-2]} do not broadcast.') from ex

    def backward(g: np.ndarray):
        return (
            unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.shape) if a.requires_grad else None,
            unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.shape) if b.requires_grad else None
        )

    return Tensor.from_op(np.matmul(a.data, b.data), (a, b), backward)


def softmax_lastdim(x: Tensor) -> Tensor:
    """Softmax over the last axis. Entries equal to -inf get exactly zero weight.

    :raises TrainingDivergenceError: On a NaN or +inf entry.
    :raises MaskedRowError: If a row has no finite entry.
    """
    x = as_tensor(x)
    if x.ndim == 0 or x.shape[-1] < 1:
        raise DimensionError(f'softmax needs a non-empty last axis, got shape {x.shape}.')
    if np.isnan(x.data).any() or np.isposinf(x.data).any():
        raise TrainingDivergenceError('softmax input holds NaN or +inf.')
    finite = np.isfinite(x.data)
    if not finite.any(axis=-1).all():
        raise MaskedRowError('Every entry of a softmax row is -inf.')

    row_max = np.where(finite, x.data, -np.inf).max(axis=-1, keepdims=True)
    exp = np.exp(x.data - row_max)
    y = exp / exp.sum(axis=-1, keepdims=True)

    return Tensor.from_op(y, (x,), lambda g: (y * (g - (g * y).sum(axis=-1, keepdims=True)),))


def exp(x: Tensor) -> Tensor:
    x = as_tensor(x)
    y = np.exp(x.data)
    return Tensor.from_op(y, (x,), lambda g: (g * y,))


def log(x: Tensor) -> Tensor:
    x = as_tensor(x)
    return Tensor.from_op(np.log(x.data), (x,), lambda g: (g / x.data,))


def sqrt(x: Tensor) -> Tensor:
    x = as_tensor(x)
    y = np.sqrt(x.data)
    return Tensor.from_op(y, (x,), lambda g: (g * 0.5 / y,))


def silu(x: Tensor) -> Tensor:
    x = as_tensor(x)
    sigmoid = 0.5 * (1.0 + np.tanh(0.5 * x.data))
    return Tensor.from_op(
        x.data * sigmoid, (x,),
        lambda g: (g * (sigmoid + x.data * sigmoid * (1.0 - sigmoid)),)
    )


def _axes(axis: t.Union[int, t.Tuple[int, ...]], ndim: int) -> t.Tuple[int, ...]:
    axes = (axis,) if isinstance(axis, int) else tuple(axis)
    return tuple(sorted(a % ndim for a in axes))


def layer_norm(
    x: Tensor,
    gain: Tensor,
    bias: Tensor,
    axis: t.Union[int, t.Tuple[int, ...]] = -1,
    eps: float = 1e-5
) -> Tensor:
    """Normalize x to zero mean and unit variance over `axis`, then scale and shift.

    gain and bias broadcast against x (e.g. shape (C, 1, 1) for NCHW features
    normalized over (1, 2, 3)).
    """
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    axes = _axes(axis, x.ndim)

    mean = x.data.mean(axis=axes, keepdims=True)
    centered = x.data - mean
    variance = (centered * centered).mean(axis=axes, keepdims=True)
    inv_std = 1.0 / np.sqrt(variance + eps)
    normalized = centered * inv_std

    def backward(g: np.ndarray):
        g_normalized = g * gain.data
        g_x = inv_std * (
            g_normalized
            - g_normalized.mean(axis=axes, keepdims=True)
            - normalized * (g_normalized * normalized).mean(axis=axes, keepdims=True)
        )
        return (
            g_x if x.requires_grad else None,
            unbroadcast(g * normalized, gain.shape) if gain.requires_grad else None,
            unbroadcast(g, bias.shape) if bias.requires_grad else None
        )

    return Tensor.from_op(normalized * gain.data + bias.data, (x, gain, bias), backward)


def conv2d(
    x: Tensor,
    kernel: Tensor,
    bias: t.Optional[Tensor] = None,
    stride: int = 1,
    padding: int = 0
) -> Tensor:
    """2-D cross-correlation of NCHW input with an (out, in, kh, kw) kernel.

    :raises DimensionError: On channel mismatch or an empty output.
    """
    x, kernel = as_tensor(x), as_tensor(kernel)
    if x.ndim != 4 or kernel.ndim != 4:
        raise DimensionError(f'conv2d needs NCHW input and OIHW kernel, got {x.shape} and {kernel.shape}.')
    n, channels, height, width = x.shape
    out_channels, in_channels, kh, kw = kernel.shape
    if channels != in_channels:
        raise DimensionError(f'Input has {channels} channels, kernel expects {in_channels}.')
    if stride < 1 or padding < 0:
        raise DimensionError('conv2d needs stride >= 1 and padding >= 0.')
    out_h = (height + 2 * padding - kh) // stride + 1
    out_w = (width + 2 * padding - kw) // stride + 1
    if out_h < 1 or out_w < 1:
        raise DimensionError(f'Kernel {kh}x{kw} does not fit input {height}x{width}.')

    padded = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    windows = sliding_window_view(padded, (kh, kw), axis=(2, 3))
    windows = windows[:, :, ::stride, ::stride][:, :, :out_h, :out_w]
    # (N, C, Ho, Wo, kh, kw) x (O, C, kh, kw) -> (N, Ho, Wo, O)
    out = np.tensordot(windows, kernel.data, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)

    parents: t.List[Tensor] = [x, kernel]
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (out_channels,):
            raise DimensionError(f'Bias must have shape ({out_channels},), got {bias.shape}.')
        out = out + bias.data[None, :, None, None]
        parents.append(bias)

    def backward(g: np.ndarray):
        g_kernel = (
            np.tensordot(g, windows, axes=([0, 2, 3], [0, 2, 3]))
            if kernel.requires_grad else None
        )
        g_x = None
        if x.requires_grad:
            g_padded = np.zeros_like(padded)
            for i in range(kh):
                for j in range(kw):
                    # (N, O, Ho, Wo) x (O, C) -> (N, Ho, Wo, C)
                    contribution = np.tensordot(g, kernel.data[:, :, i, j], axes=([1], [0]))
                    g_padded[:, :, i:i + stride * out_h:stride, j:j + stride * out_w:stride] += \
                        contribution.transpose(0, 3, 1, 2)
            g_x = g_padded[:, :, padding:padding + height, padding:padding + width]
        grads = [g_x, g_kernel]
        if bias is not None:
            grads.append(g.sum(axis=(0, 2, 3)) if bias.requires_grad else None)
        return grads

    return Tensor.from_op(out, parents, backward)


def nearest_indices(size_in: int, size_out: int) -> np.ndarray:
    """Source index of every output cell: floor(i * size_in / size_out)."""
    return (np.arange(size_out) * size_in) // size_out


def nearest_resize(x: Tensor, h: int, w: int) -> Tensor:
    """Nearest-neighbour resize of the last two axes to (h, w).

    :raises DimensionError: If h or w is not positive.
    """
    x = as_tensor(x)
    if h < 1 or w < 1:
        raise DimensionError(f'Target extents must be positive, got {h}x{w}.')
    if x.ndim < 2:
        raise DimensionError(f'nearest_resize needs at least 2 axes, got shape {x.shape}.')
    height, width = x.shape[-2:]
    rows = nearest_indices(height, h)[:, None]
    cols = nearest_indices(width, w)[None, :]

    def backward(g: np.ndarray):
        flat = np.zeros((int(np.prod(x.shape[:-2], dtype=int)), height, width))
        np.add.at(flat, (slice(None), rows, cols), g.reshape(-1, h, w))
        return (flat.reshape(x.shape),)

    return Tensor.from_op(x.data[..., rows, cols], (x,), backward)


def concatenate(tensors: t.Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(tensor) for tensor in tensors]
    try:
        data = np.concatenate([tensor.data for tensor in tensors], axis=axis)
    except ValueError as ex:
        raise DimensionError(str(ex)) from ex
    splits = np.cumsum([tensor.shape[axis] for tensor in tensors])[:-1]

    return Tensor.from_op(data, tensors, lambda g: tuple(np.split(g, splits, axis=axis)))


def take(x: Tensor, indices: t.Sequence[int], axis: int) -> Tensor:
    """Gather entries of x along axis; repeated indices accumulate gradient."""
    x = as_tensor(x)
    indices = np.asarray(indices, dtype=int)

    def backward(g: np.ndarray):
        grad = np.zeros_like(x.data)
        np.add.at(np.moveaxis(grad, axis, 0), indices, np.moveaxis(g, axis, 0))
        return (grad,)

    return Tensor.from_op(np.take(x.data, indices, axis=axis), (x,), backward)


def masked_fill(x: Tensor, mask: np.ndarray, value: float) -> Tensor:
    """Replace entries where mask is true by value; those entries pass no gradient."""
    x = as_tensor(x)
    mask = np.broadcast_to(np.asarray(mask, dtype=bool), x.shape)
    return Tensor.from_op(np.where(mask, value, x.data), (x,), lambda g: (np.where(mask, 0.0, g),))
