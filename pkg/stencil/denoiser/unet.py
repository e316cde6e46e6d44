import math
import typing as t

import numpy as np

from ..attention import AttentionOverride, AttentionProbe
from ..exceptions import DimensionError
from ..layout import ConceptLayout
from ..tensor import Module, ModuleList, Tensor, as_tensor, concatenate, silu
from ..textcond import TextEmbeddings
from .blocks import Conv2d, CrossAttentionBlock, Downsample, LayerNorm, ResBlock, TimeEmbedding, Upsample
from .config import DenoiserConfig


Layout = t.Union[ConceptLayout, np.ndarray]


class Level(Module):
    """The residual blocks (each optionally followed by cross-attention) of one resolution."""

    def __init__(self, config: DenoiserConfig, c_in: int, c_out: int, attention: bool, rng: np.random.Generator):
        super().__init__()
        self.res = ModuleList()
        self.attn = ModuleList()
        for _ in range(config.num_res_blocks):
            self.res.append(ResBlock(c_in, c_out, config.time_dim, rng))
            if attention:
                self.attn.append(CrossAttentionBlock(c_out, config.text_dim, config.heads, rng))
            c_in = c_out

    def forward(self, h: Tensor, time: Tensor, **attention_kwargs) -> Tensor:
        for index, res in enumerate(self.res):
            h = res(h, time)
            if len(self.attn):
                h = self.attn[index](h, **attention_kwargs)
        return h


class Denoiser(Module):
    """Noise-prediction U-Net with cross-attention to the prompt.

    forward runs plain cross-attention in every attention block when no layout
    is given, and rectified cross-attention everywhere when one is.
    """

    def __init__(self, config: DenoiserConfig = None, seed: int = 0):
        super().__init__()
        self.config = config = config or DenoiserConfig()
        rng = np.random.default_rng(seed)
        base, levels = config.base_channels, len(config.channel_mult)

        self.time_embed = TimeEmbedding(base, config.time_dim, config.timesteps, rng)
        self.conv_in = Conv2d(config.in_channels, base, 3, rng)

        self.down = ModuleList()
        self.downsample = ModuleList()
        channels, skips = base, []
        for level, resolution in enumerate(config.resolutions):
            out = config.channels(level)
            self.down.append(Level(config, channels, out, resolution in config.attention_resolutions, rng))
            channels = out
            skips.append(channels)
            if level < levels - 1:
                self.downsample.append(Downsample(channels, rng))

        self.mid_res1 = ResBlock(channels, channels, config.time_dim, rng)
        self.mid_attn = CrossAttentionBlock(channels, config.text_dim, config.heads, rng)
        self.mid_res2 = ResBlock(channels, channels, config.time_dim, rng)

        self.up = ModuleList()
        self.upsample = ModuleList()
        for level in reversed(range(levels)):
            out = config.channels(level)
            attention = config.resolutions[level] in config.attention_resolutions
            self.up.append(Level(config, channels + skips[level], out, attention, rng))
            channels = out
            if level > 0:
                self.upsample.append(Upsample(channels, rng))

        self.norm_out = LayerNorm(channels)
        self.conv_out = Conv2d(channels, config.in_channels, 3, rng, gain=0.1)

        for name, module in self.named_modules():
            if isinstance(module, CrossAttentionBlock):
                module.name = name

    def attention_layers(self) -> t.List[str]:
        return [module.name for _, module in self.named_modules() if isinstance(module, CrossAttentionBlock)]

    def _layout_channels(self, layout: t.Optional[Layout], batch: int) -> t.Optional[np.ndarray]:
        if layout is None:
            return None
        channels = layout.channels if isinstance(layout, ConceptLayout) else np.asarray(layout, dtype=np.float64)
        size, length = self.config.image_size, self.config.max_length
        if channels.shape[-3:] != (length, size, size) or channels.ndim not in (3, 4):
            raise DimensionError(
                f'Layout must be ({length}, {size}, {size}) or batched, got {channels.shape}.'
            )
        if channels.ndim == 4 and channels.shape[0] != batch:
            raise DimensionError(f'{channels.shape[0]} layouts for a batch of {batch}.')
        return channels

    def forward(
        self,
        z_t: Tensor,
        t: t.Union[int, np.ndarray],
        text: t.Union[TextEmbeddings, Tensor, np.ndarray],
        layout: t.Optional[Layout] = None,
        strength: float = math.inf,
        overrides: AttentionOverride = None,
        probe: AttentionProbe = None
    ) -> Tensor:
        """Predict the noise in z_t.

        :param z_t: (N, C, H, W) noisy images.
        :param t: One timestep, or one per sample.
        :param text: (S, D) or (N, S, D) prompt embeddings.
        :param layout: Full-resolution layout (S, H, W) or (N, S, H, W); None runs
            plain cross-attention.
        :raises DimensionError: On shape mismatches.
        """
        z_t = as_tensor(z_t)
        config = self.config
        expected = (config.in_channels, config.image_size, config.image_size)
        if z_t.ndim != 4 or z_t.shape[1:] != expected:
            raise DimensionError(f'Expected (N, {", ".join(map(str, expected))}) input, got {z_t.shape}.')
        batch = z_t.shape[0]

        if isinstance(text, TextEmbeddings):
            text = text.values
        text = as_tensor(text)
        if text.shape[-2:] != (config.max_length, config.text_dim) or text.ndim not in (2, 3):
            raise DimensionError(f'Text embeddings must be ({config.max_length}, {config.text_dim}), got {text.shape}.')

        steps = np.asarray(t)
        if steps.ndim == 1 and len(steps) not in (1, batch):
            raise DimensionError(f'{len(steps)} timesteps for a batch of {batch}.')

        attention_kwargs = {
            'text': text,
            'layout': self._layout_channels(layout, batch),
            'strength': strength,
            'overrides': overrides,
            'probe': probe
        }
        time = self.time_embed(steps)

        h = self.conv_in(z_t)
        skips = []
        for level, down in enumerate(self.down):
            h = down(h, time, **attention_kwargs)
            skips.append(h)
            if level < len(self.downsample):
                h = self.downsample[level](h)

        h = self.mid_res1(h, time)
        h = self.mid_attn(h, **attention_kwargs)
        h = self.mid_res2(h, time)

        for index, up in enumerate(self.up):
            h = up(concatenate([h, skips.pop()], axis=1), time, **attention_kwargs)
            if index < len(self.upsample):
                h = self.upsample[index](h)

        return self.conv_out(silu(self.norm_out(h)))
