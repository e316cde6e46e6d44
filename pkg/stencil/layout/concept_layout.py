from __future__ import annotations
import logging
from dataclasses import dataclass

import numpy as np

from ..exceptions import ContractError, DimensionError
from ..tensor import nearest_indices
from ..textcond import Prompt
from .label_map import LabelMap


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ConceptLayout:
    """C x H x W binary map, channel k belonging to prompt position k.

    A Global position's channel is all ones; a concept position's channel is
    the mask of its class.
    """
    channels: np.ndarray

    def __post_init__(self):
        channels = np.array(self.channels, dtype=np.float64)
        if channels.ndim != 3:
            raise DimensionError(f'A layout is C x H x W, got shape {channels.shape}.')
        if not np.all((channels == 0.0) | (channels == 1.0)):
            raise ContractError('Layout channels must be binary.')
        channels.flags.writeable = False
        object.__setattr__(self, 'channels', channels)

    @classmethod
    def ones(cls, channels: int, height: int, width: int) -> ConceptLayout:
        return cls(np.ones((channels, height, width)))

    @property
    def shape(self):
        return self.channels.shape

    @property
    def spatial(self):
        return self.channels.shape[1:]

    def flat(self) -> np.ndarray:
        """Channels flattened to C x (H*W), in the row-major order of image positions."""
        return self.channels.reshape(self.channels.shape[0], -1)


def expand_layout(label_map: LabelMap, prompt: Prompt) -> ConceptLayout:
    """Expand a one-channel label map into one binary channel per prompt position.

    A concept whose class is absent from the map gets an all-zero channel and a warning.
    """
    channels = np.ones((prompt.max_length, label_map.height, label_map.width))
    masks = {}
    for position, binding in enumerate(prompt.bindings):
        if binding.is_global:
            continue
        class_id = binding.class_id
        if class_id not in masks:
            masks[class_id] = label_map.mask(class_id)
            if not masks[class_id].any():
                logger.warning('Class %d is bound at position %d but absent from the layout.', class_id, position)
        channels[position] = masks[class_id]
    return ConceptLayout(channels)


def resize_channels(channels: np.ndarray, height: int, width: int) -> np.ndarray:
    """Nearest-neighbour resize of the last two axes of a (..., C, H, W) array."""
    if height < 1 or width < 1:
        raise DimensionError(f'Target extents must be positive, got {height}x{width}.')
    source_height, source_width = channels.shape[-2:]
    if (source_height, source_width) == (height, width):
        return channels
    rows = nearest_indices(source_height, height)[:, None]
    cols = nearest_indices(source_width, width)[None, :]
    return channels[..., rows, cols]


def resize_layout(layout: ConceptLayout, height: int, width: int) -> ConceptLayout:
    """Per-channel nearest-neighbour resize; channels stay binary."""
    if layout.spatial == (height, width):
        return layout
    return ConceptLayout(resize_channels(layout.channels, height, width))
