import math
import typing as t
from dataclasses import dataclass

import numpy as np

from ..exceptions import DimensionError
from ..layout import ConceptLayout
from ..tensor import Tensor, as_tensor, matmul, softmax_lastdim
from .overrides import AttentionOverride, apply_overrides
from .scores import AttentionParams, ScoreMaps, attention_scores, rectify


@dataclass(frozen=True)
class AttentionTrace:
    """What one attention call computed.

    scores are the maps fed to the softmax (rectified and overridden), shaped
    (..., heads, C, H, W) when heads > 1; weights have the same shape.
    """
    output: Tensor
    scores: ScoreMaps
    weights: np.ndarray


def _split_heads(x: Tensor, heads: int) -> Tensor:
    if heads == 1:
        return x
    # (..., N, heads * w) -> (..., heads, N, w)
    x = x.reshape(x.shape[:-1] + (heads, x.shape[-1] // heads))
    return x.swapaxes(-2, -3)


def _merge_heads(x: Tensor, heads: int) -> Tensor:
    if heads == 1:
        return x
    x = x.swapaxes(-2, -3)
    return x.reshape(x.shape[:-2] + (x.shape[-2] * x.shape[-1],))


def attend(
    image_features: Tensor,
    text_features: Tensor,
    params: AttentionParams,
    spatial: t.Tuple[int, int] = None,
    layout: t.Union[ConceptLayout, np.ndarray, None] = None,
    strength: float = math.inf,
    overrides: AttentionOverride = None
) -> AttentionTrace:
    """Project, score, optionally rectify and override, softmax over tokens, mix values.

    :param image_features: (..., H*W, D_img), row-major image positions.
    :param text_features: (..., C, D_txt).
    :param layout: C x H x W binary layout at this resolution; None runs plain cross-attention.
    :raises DimensionError: On inconsistent widths or extents.
    :raises MaskedRowError: If some position is masked in every channel.
    """
    image_features, text_features = as_tensor(image_features), as_tensor(text_features)
    if image_features.shape[-1] != params.image_dim or text_features.shape[-1] != params.text_dim:
        raise DimensionError(
            f'Features ({image_features.shape[-1]}, {text_features.shape[-1]}) do not match '
            f'projections ({params.image_dim}, {params.text_dim}).'
        )
    heads = params.heads
    q = _split_heads(matmul(image_features, params.w_q), heads)
    k = _split_heads(matmul(text_features, params.w_k), heads)
    v = _split_heads(matmul(text_features, params.w_v), heads)

    scores = attention_scores(q, k, params.d, spatial)
    if layout is not None:
        if heads > 1 and not isinstance(layout, ConceptLayout) and np.ndim(layout) > 3:
            # (N, C, H, W) -> (N, 1, C, H, W) so every head shares its sample's layout.
            layout = np.expand_dims(layout, -4)
        scores = rectify(scores, layout, strength)
    scores = apply_overrides(scores, overrides)

    # (..., C, H, W) -> (..., H*W, C): softmax over the tokens at each position.
    flat = scores.values.reshape(scores.values.shape[:-2] + (-1,)).swapaxes(-1, -2)
    weights = softmax_lastdim(flat)
    output = _merge_heads(matmul(weights, v), heads)

    return AttentionTrace(
        output=output,
        scores=scores,
        weights=np.swapaxes(weights.data, -1, -2).reshape(scores.values.shape)
    )


def cross_attention(
    image_features: Tensor,
    text_features: Tensor,
    params: AttentionParams,
    spatial: t.Tuple[int, int] = None
) -> Tensor:
    """O = softmax(M) V with the softmax over tokens at every image position."""
    return attend(image_features, text_features, params, spatial).output


def rectified_cross_attention(
    image_features: Tensor,
    text_features: Tensor,
    layout: t.Union[ConceptLayout, np.ndarray],
    params: AttentionParams,
    strength: float = math.inf,
    overrides: AttentionOverride = None,
    spatial: t.Tuple[int, int] = None
) -> Tensor:
    """O = softmax(rectify(M)) V; with an all-ones layout this equals cross_attention bitwise.

    spatial defaults to the layout's extents.
    """
    if spatial is None:
        spatial = layout.spatial if isinstance(layout, ConceptLayout) else np.shape(layout)[-2:]
    return attend(image_features, text_features, params, spatial, layout, strength, overrides).output
