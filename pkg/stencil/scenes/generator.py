import typing as t
from dataclasses import dataclass, field

import numpy as np

from ..exceptions import ConfigError, ContractError
from ..layout import LabelMap
from .palette import ALL_COMBOS, BACKGROUND, Combo, class_id, concept, palette_array


@dataclass(frozen=True)
class SceneConfig:
    size: int = 32
    combos: t.Tuple[Combo, ...] = ALL_COMBOS
    min_objects: int = 1
    max_objects: int = 3
    min_object_size: int = 8
    max_object_size: int = 16

    def __post_init__(self):
        if not 1 <= self.min_objects <= self.max_objects:
            raise ConfigError('Object counts must satisfy 1 <= min_objects <= max_objects.')
        if not 4 <= self.min_object_size <= self.max_object_size <= self.size:
            raise ConfigError('Object sizes must satisfy 4 <= min <= max <= canvas size.')


@dataclass(frozen=True)
class SceneObject:
    """A flat-shaded shape inscribed in the size x size box whose top-left corner is (x, y)."""
    shape: str
    color: str
    x: int
    y: int
    size: int

    @property
    def class_id(self) -> int:
        return class_id(self.shape, self.color)

    def mask(self, canvas: int) -> np.ndarray:
        rows, cols = np.mgrid[0:canvas, 0:canvas]
        u = (cols + 0.5 - self.x) / self.size
        v = (rows + 0.5 - self.y) / self.size
        inside = (u >= 0) & (u < 1) & (v >= 0) & (v < 1)
        if self.shape == 'circle':
            inside &= (u - 0.5) ** 2 + (v - 0.5) ** 2 <= 0.25
        elif self.shape == 'triangle':
            # Apex at the top centre, base along the bottom edge.
            inside &= v >= 2.0 * np.abs(u - 0.5)
        return inside


@dataclass(frozen=True)
class SceneSpec:
    """Objects in drawing order: later objects occlude earlier ones."""
    size: int = 32
    objects: t.Tuple[SceneObject, ...] = field(default_factory=tuple)
    background: int = BACKGROUND


def gen_scene(rng: np.random.Generator, config: SceneConfig = None) -> SceneSpec:
    """Sample 1 to max_objects objects from the allowed combinations.

    :raises ContractError: If no combination is allowed.
    """
    config = config or SceneConfig()
    if not config.combos:
        raise ContractError('No (shape, color) combination is allowed.')
    objects = []
    for _ in range(rng.integers(config.min_objects, config.max_objects + 1)):
        shape, color = config.combos[rng.integers(len(config.combos))]
        size = int(rng.integers(config.min_object_size, config.max_object_size + 1))
        x, y = (int(value) for value in rng.integers(0, config.size - size + 1, size=2))
        objects.append(SceneObject(shape, color, x, y, size))
    return SceneSpec(config.size, tuple(objects))


def render_labels(spec: SceneSpec) -> LabelMap:
    ids = np.full((spec.size, spec.size), spec.background, dtype=np.uint8)
    for scene_object in spec.objects:
        ids[scene_object.mask(spec.size)] = scene_object.class_id
    return LabelMap(ids)


def render(spec: SceneSpec) -> t.Tuple[np.ndarray, LabelMap]:
    """(H x W x 3 image in [-1, 1], label map); every region has its class's exact palette color."""
    label_map = render_labels(spec)
    pixels = palette_array()[label_map.ids]
    return pixels.astype(np.float64) / 127.5 - 1.0, label_map


def caption(spec: SceneSpec, mode: str = 'pretrain') -> str:
    """Pretraining captions name the visible objects in drawing order; fine-tuning
    captions stack the concepts of every class in the label map by ascending id.
    """
    label_map = render_labels(spec)
    if mode == 'finetune':
        return ' '.join(concept(class_id_) for class_id_ in label_map.classes())
    if mode != 'pretrain':
        raise ContractError(f'Unknown caption mode "{mode}".')
    visible = set(label_map.classes())
    words, seen = [], set()
    for scene_object in spec.objects:
        class_id_ = scene_object.class_id
        if class_id_ in visible and class_id_ not in seen:
            seen.add(class_id_)
            words.append(concept(class_id_))
    return ' '.join(words)
