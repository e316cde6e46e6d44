import typing as t

import numpy as np

from ..exceptions import ContractError, UsageError


SHAPES = ('square', 'circle', 'triangle')
COLORS = ('red', 'green', 'blue', 'yellow', 'cyan', 'magenta', 'orange', 'white')

BACKGROUND = 0
BACKGROUND_RGB = (64, 64, 64)

_COLOR_RGB = {
    'red': (255, 0, 0),
    'green': (0, 255, 0),
    'blue': (0, 0, 255),
    'yellow': (255, 255, 0),
    'cyan': (0, 255, 255),
    'magenta': (255, 0, 255),
    'orange': (255, 128, 0),
    'white': (255, 255, 255)
}
# Each shape scales its color differently so every class has its own RGB.
_SHAPE_TONE = {'square': 1.0, 'circle': 0.75, 'triangle': 0.5}

Combo = t.Tuple[str, str]


def class_id(shape: str, color: str) -> int:
    if shape not in SHAPES or color not in COLORS:
        raise ContractError(f'Unknown combination "{color} {shape}".')
    return 1 + SHAPES.index(shape) * len(COLORS) + COLORS.index(color)


def combo_of(class_id_: int) -> Combo:
    """(shape, color) of an object class."""
    if not 1 <= class_id_ <= len(SHAPES) * len(COLORS):
        raise ContractError(f'Class {class_id_} is not an object class.')
    shape_index, color_index = divmod(class_id_ - 1, len(COLORS))
    return SHAPES[shape_index], COLORS[color_index]


def concept(class_id_: int) -> str:
    if class_id_ == BACKGROUND:
        return 'background'
    shape, color = combo_of(class_id_)
    return f'{color} {shape}'


ALL_COMBOS: t.Tuple[Combo, ...] = tuple((shape, color) for shape in SHAPES for color in COLORS)
OBJECT_CLASSES: t.Tuple[int, ...] = tuple(class_id(shape, color) for shape, color in ALL_COMBOS)


def _class_rgb(class_id_: int) -> t.Tuple[int, int, int]:
    if class_id_ == BACKGROUND:
        return BACKGROUND_RGB
    shape, color = combo_of(class_id_)
    return tuple(int(value) for value in np.round(np.array(_COLOR_RGB[color]) * _SHAPE_TONE[shape]))


# class id -> exact RGB; a bijection.
PALETTE: t.Dict[int, t.Tuple[int, int, int]] = {
    class_id_: _class_rgb(class_id_) for class_id_ in (BACKGROUND,) + OBJECT_CLASSES
}


def palette_array(palette: t.Mapping[int, t.Sequence[int]] = None) -> np.ndarray:
    """256 x 3 lookup table from class id to RGB; unused ids are black."""
    table = np.zeros((256, 3), dtype=np.uint8)
    for class_id_, rgb in (palette or PALETTE).items():
        table[class_id_] = rgb
    return table


def parse_combos(text: str) -> t.List[int]:
    """Class ids of a comma-separated list like "blue triangle, red circle".

    :raises UsageError: On anything but "<color> <shape>" items.
    """
    class_ids = []
    for item in filter(None, (item.strip().lower() for item in text.split(','))):
        words = item.split()
        if len(words) != 2 or words[0] not in COLORS or words[1] not in SHAPES:
            raise UsageError(f'"{item}" is not a "<color> <shape>" combination.')
        class_ids.append(class_id(words[1], words[0]))
    return class_ids
