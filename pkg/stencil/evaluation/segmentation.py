import typing as t

import numpy as np

from ..exceptions import ContractError, DimensionError
from ..layout import LabelMap
from ..scenes import PALETTE


def oracle_segment(image: np.ndarray, palette: t.Mapping[int, t.Sequence[int]] = None) -> LabelMap:
    """Assign every pixel the class whose palette color is nearest in RGB.

    Ties go to the lowest class id.

    :param image: H x W x 3 in [-1, 1].
    :raises ContractError: If the palette is empty.
    """
    palette = PALETTE if palette is None else palette
    if not palette:
        raise ContractError('The palette is empty.')
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[2] != 3:
        raise DimensionError(f'Expected an H x W x 3 image, got {image.shape}.')

    class_ids = np.array(sorted(palette), dtype=np.int64)
    colors = np.array([palette[class_id] for class_id in class_ids], dtype=np.float64)
    rgb = (image + 1.0) * 127.5
    distances = ((rgb[:, :, None, :] - colors[None, None, :, :]) ** 2).sum(axis=-1)
    # argmin returns the first minimum, i.e. the lowest class id.
    return LabelMap(class_ids[np.argmin(distances, axis=-1)])
