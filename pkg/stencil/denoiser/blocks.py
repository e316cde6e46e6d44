import math
import typing as t

import numpy as np

from ..attention import AttentionEvent, AttentionOverride, AttentionParams, AttentionProbe, attend
from ..exceptions import ContractError, DimensionError
from ..layout import resize_channels
from ..tensor import Module, Parameter, Tensor, as_tensor, conv2d, layer_norm, matmul, nearest_resize, silu


def _init(rng: np.random.Generator, shape: t.Tuple[int, ...], fan_in: int, gain: float = 1.0):
    return rng.standard_normal(shape) * gain / math.sqrt(fan_in)


class Linear(Module):
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator):
        super().__init__()
        self.weight = Parameter(_init(rng, (n_in, n_out), n_in))
        self.bias = Parameter(np.zeros(n_out))

    def forward(self, x: Tensor) -> Tensor:
        return matmul(x, self.weight) + self.bias


class Conv2d(Module):
    def __init__(
        self,
        c_in: int,
        c_out: int,
        kernel_size: int,
        rng: np.random.Generator,
        stride: int = 1,
        gain: float = 1.0
    ):
        super().__init__()
        self.weight = Parameter(_init(rng, (c_out, c_in, kernel_size, kernel_size), c_in * kernel_size ** 2, gain))
        self.bias = Parameter(np.zeros(c_out))
        self.stride = stride
        self.padding = kernel_size // 2

    def forward(self, x: Tensor) -> Tensor:
        return conv2d(x, self.weight, self.bias, stride=self.stride, padding=self.padding)


class LayerNorm(Module):
    """Normalizes each sample over (C, H, W) with a per-channel gain and bias."""

    def __init__(self, channels: int):
        super().__init__()
        self.gain = Parameter(np.ones((channels, 1, 1)))
        self.bias = Parameter(np.zeros((channels, 1, 1)))

    def forward(self, x: Tensor) -> Tensor:
        return layer_norm(x, self.gain, self.bias, axis=(1, 2, 3))


def sinusoidal_features(t: t.Union[int, np.ndarray], dim: int) -> np.ndarray:
    """Interleaved [sin(t f_0), cos(t f_0), sin(t f_1), ...] with geometric frequencies."""
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    half = dim // 2
    frequencies = np.exp(-math.log(10000.0) * np.arange(half) / half)
    angles = t[:, None] * frequencies[None, :]
    features = np.empty((len(t), dim))
    features[:, 0::2] = np.sin(angles)
    features[:, 1::2] = np.cos(angles)
    return features


class TimeEmbedding(Module):
    """Sinusoidal features of the timestep followed by a learned 2-layer map."""

    def __init__(self, dim: int, out_dim: int, timesteps: int, rng: np.random.Generator):
        super().__init__()
        self.dim = dim
        self.timesteps = timesteps
        self.fc1 = Linear(dim, out_dim, rng)
        self.fc2 = Linear(out_dim, out_dim, rng)

    def forward(self, t: t.Union[int, np.ndarray]) -> Tensor:
        steps = np.atleast_1d(np.asarray(t))
        if steps.dtype.kind not in 'iu' or steps.min() < 0 or steps.max() >= self.timesteps:
            raise ContractError(f'Timesteps must be integers in [0, {self.timesteps}).', details=steps.tolist())
        return self.fc2(silu(self.fc1(Tensor(sinusoidal_features(steps, self.dim)))))


class ResBlock(Module):
    def __init__(self, c_in: int, c_out: int, time_dim: int, rng: np.random.Generator):
        super().__init__()
        self.norm1 = LayerNorm(c_in)
        self.conv1 = Conv2d(c_in, c_out, 3, rng)
        self.time_proj = Linear(time_dim, c_out, rng)
        self.norm2 = LayerNorm(c_out)
        self.conv2 = Conv2d(c_out, c_out, 3, rng, gain=0.1)
        if c_in != c_out:
            self.shortcut = Conv2d(c_in, c_out, 1, rng)
        else:
            self.shortcut = None

    def forward(self, x: Tensor, time: Tensor) -> Tensor:
        h = self.conv1(silu(self.norm1(x)))
        bias = self.time_proj(silu(time))
        h = h + bias.reshape(bias.shape + (1, 1))
        h = self.conv2(silu(self.norm2(h)))
        return (x if self.shortcut is None else self.shortcut(x)) + h


class CrossAttentionBlock(Module):
    """Residual cross-attention from image positions to prompt tokens.

    Without a layout every call is plain cross-attention; with one, the layout
    is resized to this block's resolution and the scores are rectified.
    """

    def __init__(self, channels: int, text_dim: int, heads: int, rng: np.random.Generator):
        super().__init__()
        self.name = ''
        self.heads = heads
        self.norm = LayerNorm(channels)
        self.w_q = Parameter(_init(rng, (channels, channels), channels))
        self.w_k = Parameter(_init(rng, (text_dim, channels), text_dim))
        self.w_v = Parameter(_init(rng, (text_dim, channels), text_dim))
        self.proj_out = Linear(channels, channels, rng)

    def forward(
        self,
        x: Tensor,
        text: Tensor,
        layout: t.Optional[np.ndarray] = None,
        strength: float = math.inf,
        overrides: AttentionOverride = None,
        probe: AttentionProbe = None
    ) -> Tensor:
        n, channels, height, width = x.shape
        if text.shape[-1] != self.w_k.shape[0]:
            raise DimensionError(f'Text width {text.shape[-1]} != {self.w_k.shape[0]}.')
        h = self.norm(x).reshape(n, channels, height * width).swapaxes(1, 2)
        if layout is not None:
            layout = resize_channels(layout, height, width)

        trace = attend(
            h, text,
            AttentionParams(self.w_q, self.w_k, self.w_v, heads=self.heads),
            spatial=(height, width),
            layout=layout,
            strength=strength,
            overrides=overrides
        )
        if probe is not None:
            probe(AttentionEvent(
                layer=self.name,
                step=probe.step,
                scores=trace.scores.numpy(),
                weights=trace.weights,
                output=trace.output.data,
                layout=layout,
                strength=strength
            ))

        out = self.proj_out(trace.output).swapaxes(1, 2).reshape(n, channels, height, width)
        return x + out


class Downsample(Module):
    def __init__(self, channels: int, rng: np.random.Generator):
        super().__init__()
        self.conv = Conv2d(channels, channels, 3, rng, stride=2)

    def forward(self, x: Tensor) -> Tensor:
        return self.conv(x)


class Upsample(Module):
    def __init__(self, channels: int, rng: np.random.Generator):
        super().__init__()
        self.conv = Conv2d(channels, channels, 3, rng)

    def forward(self, x: Tensor) -> Tensor:
        x = as_tensor(x)
        return self.conv(nearest_resize(x, 2 * x.shape[-2], 2 * x.shape[-1]))
