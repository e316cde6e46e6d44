from __future__ import annotations
import typing as t

import numpy as np

from ..exceptions import ContractError, DimensionError
from ..tensor import nearest_indices
from ..textcond.vocabulary import UNLABELED


class LabelMap:
    """H x W raster of 8-bit class ids, one id per pixel.

    Pixels equal to UNLABELED (255) belong to no class and contribute no layout channel.
    """

    def __init__(self, ids: t.Any):
        ids = np.asarray(ids)
        if ids.ndim != 2 or 0 in ids.shape:
            raise DimensionError(f'A label map must be a non-empty 2-D array, got shape {ids.shape}.')
        if ids.dtype.kind == 'f' and not np.all(ids == np.round(ids)):
            raise ContractError('Class ids must be integers.')
        if ids.min() < 0 or ids.max() > UNLABELED:
            raise ContractError(f'Class ids must lie in 0-{UNLABELED}.')
        self.ids: np.ndarray = ids.astype(np.uint8)
        self.ids.flags.writeable = False

    @property
    def height(self) -> int:
        return self.ids.shape[0]

    @property
    def width(self) -> int:
        return self.ids.shape[1]

    @property
    def shape(self) -> t.Tuple[int, int]:
        return self.ids.shape

    def classes(self) -> t.List[int]:
        """Sorted class ids present, excluding UNLABELED."""
        return [int(class_id) for class_id in np.unique(self.ids) if class_id != UNLABELED]

    def mask(self, class_id: int) -> np.ndarray:
        return self.ids == class_id

    def resize(self, height: int, width: int) -> LabelMap:
        """Nearest-neighbour resize; class ids are never mixed."""
        if height < 1 or width < 1:
            raise DimensionError(f'Target extents must be positive, got {height}x{width}.')
        rows = nearest_indices(self.height, height)[:, None]
        cols = nearest_indices(self.width, width)[None, :]
        return LabelMap(self.ids[rows, cols])

    def __eq__(self, other):
        return isinstance(other, LabelMap) and np.array_equal(self.ids, other.ids)

    def __hash__(self):
        return hash((self.shape, self.ids.tobytes()))

    def __repr__(self):
        return f'LabelMap({self.height}x{self.width}, classes={self.classes()})'


def fit_label_map(label_map: LabelMap, size: int) -> LabelMap:
    """Resize any H x W label map to the model's size x size canvas."""
    if label_map.shape == (size, size):
        return label_map
    return label_map.resize(size, size)
