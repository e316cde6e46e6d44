from __future__ import annotations
import itertools
import typing as t
from dataclasses import dataclass, field

import numpy as np

from ..exceptions import ContractError, DimensionError
from ..layout import LabelMap


def _ids(label_map: t.Union[LabelMap, np.ndarray]) -> np.ndarray:
    return label_map.ids if isinstance(label_map, LabelMap) else np.asarray(label_map)


def _check_pair(pred: np.ndarray, gt: np.ndarray):
    if pred.shape != gt.shape:
        raise DimensionError(f'Prediction {pred.shape} and ground truth {gt.shape} differ in size.')


@dataclass
class ConfusionAccumulator:
    """Per-class intersection, union and pixel counts over any number of label-map pairs.

    :param classes: Classes to score, every class seen when None.
    """
    classes: t.Optional[t.Tuple[int, ...]] = None
    intersection: t.Dict[int, int] = field(default_factory=dict)
    union: t.Dict[int, int] = field(default_factory=dict)
    pixels: t.Dict[int, int] = field(default_factory=dict)
    correct: int = 0
    total: int = 0
    images: int = 0

    def update(self, pred: t.Union[LabelMap, np.ndarray], gt: t.Union[LabelMap, np.ndarray]) -> ConfusionAccumulator:
        pred, gt = _ids(pred), _ids(gt)
        _check_pair(pred, gt)
        classes = self.classes if self.classes is not None else np.union1d(np.unique(pred), np.unique(gt))
        for class_id in (int(class_id) for class_id in classes):
            in_pred, in_gt = pred == class_id, gt == class_id
            self.intersection[class_id] = self.intersection.get(class_id, 0) + int(np.sum(in_pred & in_gt))
            self.union[class_id] = self.union.get(class_id, 0) + int(np.sum(in_pred | in_gt))
            self.pixels[class_id] = self.pixels.get(class_id, 0) + int(np.sum(in_gt))
        self.correct += int(np.sum(pred == gt))
        self.total += pred.size
        self.images += 1
        return self

    def merge(self, other: ConfusionAccumulator) -> ConfusionAccumulator:
        merged = ConfusionAccumulator(self.classes)
        for source in (self, other):
            for name in ('intersection', 'union', 'pixels'):
                target = getattr(merged, name)
                for class_id, count in getattr(source, name).items():
                    target[class_id] = target.get(class_id, 0) + count
            merged.correct += source.correct
            merged.total += source.total
            merged.images += source.images
        return merged

    def per_class_iou(self) -> t.Dict[int, float]:
        """IoU of every class present in some prediction or ground truth."""
        return {
            class_id: self.intersection[class_id] / union
            for class_id, union in sorted(self.union.items()) if union > 0
        }

    def miou(self) -> float:
        ious = self.per_class_iou()
        return float(np.mean(list(ious.values()))) if ious else 0.0

    def pixel_acc(self) -> float:
        return self.correct / self.total if self.total else 0.0


def miou(
    pred: t.Union[LabelMap, np.ndarray],
    gt: t.Union[LabelMap, np.ndarray],
    classes: t.Iterable[int] = None
) -> t.Tuple[t.Dict[int, float], float]:
    """(per-class IoU, mean IoU); classes absent from both maps are left out."""
    accumulator = ConfusionAccumulator(None if classes is None else tuple(classes)).update(pred, gt)
    return accumulator.per_class_iou(), accumulator.miou()


def pixel_acc(pred: t.Union[LabelMap, np.ndarray], gt: t.Union[LabelMap, np.ndarray]) -> float:
    pred, gt = _ids(pred), _ids(gt)
    _check_pair(pred, gt)
    return float(np.mean(pred == gt))


@dataclass(frozen=True)
class RegionStats:
    mean: np.ndarray
    variance: np.ndarray
    count: int


def region_stats(image: np.ndarray, mask: np.ndarray) -> RegionStats:
    """Per-channel mean and variance of the pixels under mask.

    :raises ContractError: If the mask selects no pixel.
    """
    image, mask = np.asarray(image, dtype=np.float64), np.asarray(mask, dtype=bool)
    if image.shape[:2] != mask.shape:
        raise DimensionError(f'Mask {mask.shape} does not match image {image.shape[:2]}.')
    if not mask.any():
        raise ContractError('The region mask is empty.')
    pixels = image[mask]
    return RegionStats(mean=pixels.mean(axis=0), variance=pixels.var(axis=0), count=len(pixels))


def diversity(samples: t.Sequence[np.ndarray]) -> float:
    """Mean pairwise RMS distance between samples of the same layout.

    :raises ContractError: With fewer than two samples.
    """
    if len(samples) < 2:
        raise ContractError('Diversity needs at least two samples.')
    samples = [np.asarray(sample, dtype=np.float64) for sample in samples]
    distances = [np.sqrt(np.mean((a - b) ** 2)) for a, b in itertools.combinations(samples, 2)]
    return float(np.mean(distances))
