from .config import DenoiserConfig
from .blocks import (
    Linear,
    Conv2d,
    LayerNorm,
    TimeEmbedding,
    ResBlock,
    CrossAttentionBlock,
    Downsample,
    Upsample,
    sinusoidal_features
)
from .unet import Denoiser
from .checkpoint import Checkpoint, save_checkpoint, load_checkpoint, encode_checkpoint, decode_checkpoint


def time_embed(model: Denoiser, t):
    """Timestep embedding of the given model."""
    return model.time_embed(t)
