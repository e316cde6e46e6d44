import typing as t
from dataclasses import dataclass

from ..exceptions import ConfigError
from ..utilities import from_section, to_section


@dataclass(frozen=True)
class DenoiserConfig:
    """Shape of the noise-prediction U-Net.

    channel_mult has one entry per resolution of the ladder (32 -> 16 -> 8 by
    default); cross-attention runs at every resolution listed in attention_resolutions.
    """
    image_size: int = 32
    in_channels: int = 3
    base_channels: int = 32
    channel_mult: t.Tuple[int, ...] = (1, 2, 2)
    num_res_blocks: int = 2
    attention_resolutions: t.Tuple[int, ...] = (16, 8)
    text_dim: int = 32
    max_length: int = 16
    heads: int = 1
    timesteps: int = 1000

    def __post_init__(self):
        if self.image_size % (2 ** (len(self.channel_mult) - 1)):
            raise ConfigError(
                f'image_size {self.image_size} is not divisible by 2^{len(self.channel_mult) - 1}.'
            )
        missing = sorted(set(self.attention_resolutions) - set(self.resolutions))
        if missing:
            raise ConfigError(f'Attention resolutions {missing} are not on the ladder {self.resolutions}.')
        if min(self.base_channels, self.num_res_blocks, self.text_dim, self.max_length, self.heads) < 1:
            raise ConfigError('Channel counts, block counts and lengths must be positive.')
        if self.base_channels % 2:
            raise ConfigError('base_channels must be even (sinusoidal features come in sin/cos pairs).')

    @property
    def resolutions(self) -> t.Tuple[int, ...]:
        return tuple(self.image_size // 2 ** level for level in range(len(self.channel_mult)))

    @property
    def time_dim(self) -> int:
        return 4 * self.base_channels

    def channels(self, level: int) -> int:
        return self.base_channels * self.channel_mult[level]

    def to_json(self):
        return to_section(self)

    @classmethod
    def from_json(cls, obj: t.Optional[t.Mapping[str, t.Any]]):
        return from_section(cls, obj, 'denoiser')

    def parameter_count(self) -> int:
        """Closed-form number of scalars in the network built from this config."""
        def conv(c_in, c_out, k):
            return c_out * c_in * k * k + c_out

        def linear(n_in, n_out):
            return n_in * n_out + n_out

        def norm(c):
            return 2 * c

        def res_block(c_in, c_out):
            shortcut = conv(c_in, c_out, 1) if c_in != c_out else 0
            return (
                norm(c_in) + conv(c_in, c_out, 3) + linear(self.time_dim, c_out)
                + norm(c_out) + conv(c_out, c_out, 3) + shortcut
            )

        def attention(c):
            return norm(c) + c * c + 2 * self.text_dim * c + linear(c, c)

        base, levels = self.base_channels, len(self.channel_mult)
        count = linear(base, self.time_dim) + linear(self.time_dim, self.time_dim)
        count += conv(self.in_channels, base, 3)

        channels = base
        for level, resolution in enumerate(self.resolutions):
            out = self.channels(level)
            for _ in range(self.num_res_blocks):
                count += res_block(channels, out)
                channels = out
                if resolution in self.attention_resolutions:
                    count += attention(channels)
            if level < levels - 1:
                count += conv(channels, channels, 3)

        count += 2 * res_block(channels, channels) + attention(channels)

        for level in reversed(range(levels)):
            resolution, out = self.resolutions[level], self.channels(level)
            channels += out
            for _ in range(self.num_res_blocks):
                count += res_block(channels, out)
                channels = out
                if resolution in self.attention_resolutions:
                    count += attention(channels)
            if level > 0:
                count += conv(channels, channels, 3)

        return count + norm(channels) + conv(channels, self.in_channels, 3)
