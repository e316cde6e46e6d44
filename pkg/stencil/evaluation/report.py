import json
import typing as t
from dataclasses import dataclass
from pathlib import Path

from ..exceptions import FormatError, StencilIOError
from .metrics import ConfusionAccumulator


@dataclass(frozen=True)
class EvalReport:
    miou: float
    per_class: t.Dict[int, float]
    pixel_acc: float
    n_images: int
    diversity: t.Optional[float] = None

    @classmethod
    def from_accumulator(cls, accumulator: ConfusionAccumulator, diversity: float = None):
        return cls(
            miou=accumulator.miou(),
            per_class=accumulator.per_class_iou(),
            pixel_acc=accumulator.pixel_acc(),
            n_images=accumulator.images,
            diversity=diversity
        )

    def to_json(self):
        obj = {
            'miou': self.miou,
            'per_class': {str(class_id): iou for class_id, iou in sorted(self.per_class.items())},
            'pixel_acc': self.pixel_acc,
            'n_images': self.n_images
        }
        if self.diversity is not None:
            obj['diversity'] = self.diversity
        return obj

    def save(self, path: t.Union[str, Path]):
        try:
            with open(path, 'w', encoding='utf-8') as report_file:
                json.dump(self.to_json(), report_file, indent=2)
        except OSError as ex:
            raise StencilIOError(f'Cannot write report {path}: {ex}') from ex


def validate_report(obj: t.Any) -> EvalReport:
    """Check a loaded report against its schema.

    :raises FormatError: On a missing key or a value of the wrong type or range.
    """
    try:
        per_class = {int(class_id): float(iou) for class_id, iou in obj['per_class'].items()}
        report = EvalReport(
            miou=float(obj['miou']),
            per_class=per_class,
            pixel_acc=float(obj['pixel_acc']),
            n_images=obj['n_images'],
            diversity=None if obj.get('diversity') is None else float(obj['diversity'])
        )
    except (KeyError, TypeError, ValueError, AttributeError) as ex:
        raise FormatError(f'Malformed report: {ex}') from ex
    if not isinstance(report.n_images, int) or report.n_images < 0:
        raise FormatError('n_images must be a non-negative integer.')
    for value in [report.miou, report.pixel_acc] + list(per_class.values()):
        if not 0.0 <= value <= 1.0:
            raise FormatError(f'Score {value} is outside [0, 1].')
    return report
