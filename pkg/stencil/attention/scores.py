import math
import typing as t
from dataclasses import dataclass

import numpy as np

from ..exceptions import ContractError, DimensionError
from ..layout import ConceptLayout
from ..tensor import Tensor, as_tensor, matmul, masked_fill


@dataclass
class AttentionParams:
    """Projection matrices of one cross-attention layer.

    w_q: D_img x d, w_k: D_txt x d, w_v: D_txt x d_v. With several heads, d and
    d_v are split evenly and every head is scaled by its own width.
    """
    w_q: Tensor
    w_k: Tensor
    w_v: Tensor
    heads: int = 1

    def __post_init__(self):
        self.w_q, self.w_k, self.w_v = as_tensor(self.w_q), as_tensor(self.w_k), as_tensor(self.w_v)
        if self.w_q.ndim != 2 or self.w_k.ndim != 2 or self.w_v.ndim != 2:
            raise DimensionError('Projection matrices must be 2-D.')
        if self.w_q.shape[1] != self.w_k.shape[1]:
            raise DimensionError(
                f'Query and key widths differ: {self.w_q.shape[1]} != {self.w_k.shape[1]}.'
            )
        if self.w_k.shape[0] != self.w_v.shape[0]:
            raise DimensionError('Key and value projections must read the same text width.')
        if self.heads < 1 or self.w_q.shape[1] % self.heads or self.w_v.shape[1] % self.heads:
            raise DimensionError(f'Widths are not divisible into {self.heads} heads.')

    @property
    def d(self) -> int:
        """Query/key width of one head, the scaling dimension."""
        return self.w_q.shape[1] // self.heads

    @property
    def image_dim(self) -> int:
        return self.w_q.shape[0]

    @property
    def text_dim(self) -> int:
        return self.w_k.shape[0]

    @classmethod
    def random(
        cls,
        image_dim: int,
        text_dim: int,
        d: int,
        d_v: int = None,
        heads: int = 1,
        rng: np.random.Generator = None,
        requires_grad: bool = False
    ):
        rng = rng or np.random.default_rng(0)
        d_v = d_v or d
        return cls(
            w_q=Tensor(rng.standard_normal((image_dim, d)) / math.sqrt(image_dim), requires_grad=requires_grad),
            w_k=Tensor(rng.standard_normal((text_dim, d)) / math.sqrt(text_dim), requires_grad=requires_grad),
            w_v=Tensor(rng.standard_normal((text_dim, d_v)) / math.sqrt(text_dim), requires_grad=requires_grad),
            heads=heads
        )


@dataclass(frozen=True)
class ScoreMaps:
    """Attention scores stored as (..., C, H, W): one spatial map per token."""
    values: Tensor

    @property
    def channels(self) -> int:
        return self.values.shape[-3]

    @property
    def spatial(self) -> t.Tuple[int, int]:
        return self.values.shape[-2:]

    def numpy(self) -> np.ndarray:
        return self.values.data


def attention_scores(q: Tensor, k: Tensor, d: int, spatial: t.Tuple[int, int] = None) -> ScoreMaps:
    """M[k, i, j] = <Q[i * W + j], K[k]> / sqrt(d).

    :param q: (..., H*W, d) queries, one row per image position in row-major order.
    :param k: (..., C, d) keys, one row per token.
    :param spatial: (H, W); defaults to (1, H*W).
    :raises ContractError: If d <= 0.
    :raises DimensionError: If the column widths are not d or spatial does not cover Q.
    """
    if d <= 0:
        raise ContractError(f'The scaling dimension must be positive, got {d}.')
    q, k = as_tensor(q), as_tensor(k)
    if q.shape[-1] != d or k.shape[-1] != d:
        raise DimensionError(f'Query/key widths {q.shape[-1]}, {k.shape[-1]} must equal d={d}.')
    positions = q.shape[-2]
    height, width = spatial or (1, positions)
    if height * width != positions:
        raise DimensionError(f'Spatial extents {height}x{width} do not cover {positions} positions.')

    scores = matmul(q, k.swapaxes(-1, -2)) / math.sqrt(d)
    scores = scores.swapaxes(-1, -2)
    return ScoreMaps(scores.reshape(scores.shape[:-1] + (height, width)))


def _channels(layout: t.Union[ConceptLayout, np.ndarray]) -> np.ndarray:
    return layout.channels if isinstance(layout, ConceptLayout) else np.asarray(layout, dtype=np.float64)


def rectify(
    scores: ScoreMaps,
    layout: t.Union[ConceptLayout, np.ndarray],
    strength: float = math.inf
) -> ScoreMaps:
    """Keep scores where the layout is 1; elsewhere -inf (strength inf) or lowered by strength.

    Entries where the layout is 1 pass through unchanged, so Global (all-ones)
    channels are never touched.

    :param layout: C x H x W, or batched (..., C, H, W) broadcasting against the scores.
    :raises ContractError: If strength is not a positive number or +inf.
    :raises DimensionError: If the layout does not match the scores.
    """
    if not strength > 0:
        raise ContractError(f'Rectification strength must be positive, got {strength}.')
    channels = _channels(layout)
    if channels.shape[-3:] != scores.values.shape[-3:]:
        raise DimensionError(f'Layout shape {channels.shape} does not match scores {scores.values.shape[-3:]}.')
    try:
        np.broadcast_shapes(channels.shape, scores.values.shape)
    except ValueError as ex:
        raise DimensionError(f'Layout shape {channels.shape} does not broadcast to {scores.values.shape}.') from ex

    masked = channels == 0.0
    if math.isinf(strength):
        return ScoreMaps(masked_fill(scores.values, masked, -math.inf))
    return ScoreMaps(scores.values + np.where(masked, -float(strength), 0.0))
