import json
import logging
import typing as t
from collections import Counter
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .. import settings
from ..exceptions import ContractError, FormatError, StencilIOError
from ..layout import save_image, save_label_map
from ..utilities import multithread
from .generator import SceneConfig, caption, gen_scene, render
from .palette import OBJECT_CLASSES, concept, parse_combos


logger = logging.getLogger(__name__)

SPLITS = ('pretrain', 'finetune', 'test')
DEFAULT_FRACTIONS = (0.5, 0.4, 0.1)
MANIFEST_NAME = 'manifest.jsonl'
META_NAME = 'meta.json'


@dataclass(frozen=True)
class Record:
    """One scene on disk; paths are relative to the manifest's directory."""
    image: str
    labels: str
    caption: str
    split: str
    classes: t.Tuple[int, ...]
    scene: int

    def to_json(self):
        obj = asdict(self)
        obj['classes'] = list(self.classes)
        return obj

    @classmethod
    def from_json(cls, obj: t.Mapping[str, t.Any]):
        try:
            record = cls(
                image=str(obj['image']),
                labels=str(obj['labels']),
                caption=str(obj['caption']),
                split=str(obj['split']),
                classes=tuple(int(class_id) for class_id in obj['classes']),
                scene=int(obj['scene'])
            )
        except (KeyError, TypeError, ValueError) as ex:
            raise FormatError(f'Malformed manifest record: {ex}') from ex
        if record.split not in SPLITS:
            raise FormatError(f'Unknown split "{record.split}".')
        return record


@dataclass
class DatasetManifest:
    records: t.List[Record]
    seed: int
    holdout: t.Tuple[int, ...] = ()
    root: Path = field(default_factory=Path)

    def split(self, name: str) -> t.List[Record]:
        return [record for record in self.records if record.split == name]

    def path(self, relative: str) -> Path:
        return self.root / relative

    def save(self, root: t.Union[str, Path] = None) -> Path:
        root = Path(root or self.root)
        try:
            root.mkdir(parents=True, exist_ok=True)
            with open(root / MANIFEST_NAME, 'w', encoding='utf-8') as manifest_file:
                for record in self.records:
                    manifest_file.write(json.dumps(record.to_json(), sort_keys=True) + '\n')
            with open(root / META_NAME, 'w', encoding='utf-8') as meta_file:
                json.dump({
                    'seed': self.seed,
                    'holdout': [concept(class_id) for class_id in self.holdout],
                    'n': len(self.records)
                }, meta_file, indent=2, sort_keys=True)
        except OSError as ex:
            raise StencilIOError(f'Cannot write manifest to {root}: {ex}') from ex
        return root / MANIFEST_NAME

    @classmethod
    def load(cls, path: t.Union[str, Path]):
        """Read manifest.jsonl (and meta.json beside it).

        :raises StencilIOError: If the manifest or a referenced file is missing.
        :raises FormatError: On malformed lines.
        """
        path = Path(path)
        if path.is_dir():
            path = path / MANIFEST_NAME
        try:
            with open(path, 'r', encoding='utf-8') as manifest_file:
                lines = [line for line in manifest_file if line.strip()]
        except OSError as ex:
            raise StencilIOError(f'Cannot read manifest {path}: {ex}') from ex
        try:
            records = [Record.from_json(json.loads(line)) for line in lines]
        except json.JSONDecodeError as ex:
            raise FormatError(f'{path}: {ex}') from ex

        seed, holdout = 0, ()
        meta_path = path.parent / META_NAME
        if meta_path.exists():
            with open(meta_path, 'r', encoding='utf-8') as meta_file:
                meta = json.load(meta_file)
            seed, holdout = meta.get('seed', 0), tuple(parse_combos(', '.join(meta.get('holdout', []))))

        manifest = cls(records, seed, holdout, path.parent)
        for record in records:
            for relative in (record.image, record.labels):
                if not manifest.path(relative).exists():
                    raise StencilIOError(f'Manifest references a missing file: {relative}.')
        return manifest


def assign_split(u: float, fractions: t.Sequence[float] = DEFAULT_FRACTIONS) -> str:
    bounds = np.cumsum(fractions)
    for split, bound in zip(SPLITS, bounds):
        if u < bound:
            return split
    return SPLITS[-1]


def _scene(index: int, seed: int, root: Path, config: SceneConfig, fractions: t.Sequence[float]) -> Record:
    # Each scene owns its generator, so scenes can be produced in any order.
    rng = np.random.default_rng([seed, index])
    split = assign_split(rng.random(), fractions)
    spec = gen_scene(rng, config)
    image, label_map = render(spec)

    name = f'scene-{index:06d}'
    image_path, labels_path = f'images/{name}.ppm', f'labels/{name}.pgm'
    save_image(image, root / image_path)
    save_label_map(label_map, root / labels_path)
    return Record(
        image=image_path,
        labels=labels_path,
        caption=caption(spec, 'pretrain' if split == 'pretrain' else 'finetune'),
        split=split,
        classes=tuple(label_map.classes()),
        scene=index
    )


def generate_dataset(
    root: t.Union[str, Path],
    n: int,
    seed: int,
    config: SceneConfig = None,
    fractions: t.Sequence[float] = DEFAULT_FRACTIONS,
    max_workers: int = None
) -> DatasetManifest:
    """Render n scenes under root and return their (unfiltered, unsaved) manifest."""
    if n < 0:
        raise ContractError(f'n must be >= 0, got {n}.')
    if len(fractions) != len(SPLITS) or abs(sum(fractions) - 1.0) > 1e-9 or min(fractions) < 0:
        raise ContractError(f'Split fractions must be {len(SPLITS)} non-negative numbers summing to 1.')
    root = Path(root)
    try:
        for directory in ('images', 'labels'):
            (root / directory).mkdir(parents=True, exist_ok=True)
    except OSError as ex:
        raise StencilIOError(f'Cannot create dataset directory {root}: {ex}') from ex

    records = multithread(
        _scene, list(range(n)),
        max_workers=max_workers or settings.get_worker_count(),
        seed=seed, root=root, config=config or SceneConfig(), fractions=fractions
    )
    return DatasetManifest(records, seed, (), root)


def holdout_filter(manifest: DatasetManifest, held_out: t.Iterable[int]) -> DatasetManifest:
    """Drop every fine-tune record containing a held-out class; other splits are untouched.

    :raises ContractError: If a held-out class is not an object class.
    """
    held_out = tuple(sorted(set(held_out)))
    unknown = [class_id for class_id in held_out if class_id not in OBJECT_CLASSES]
    if unknown:
        raise ContractError(f'Held-out classes {unknown} are not object classes.')
    if not held_out:
        return replace(manifest, records=list(manifest.records))

    before = census(manifest).get('finetune', {})
    records = [
        record for record in manifest.records
        if record.split != 'finetune' or not set(record.classes) & set(held_out)
    ]
    filtered = replace(manifest, records=records, holdout=held_out)
    after = census(filtered).get('finetune', {})

    for class_id in sorted(set(before) - set(after) - set(held_out)):
        logger.warning('Holding out %s also removed every fine-tune record of "%s".',
                       ', '.join(concept(held) for held in held_out), concept(class_id))
    logger.info('Holdout removed %d fine-tune records.', len(manifest.records) - len(records))
    return filtered


def census(manifest: DatasetManifest) -> t.Dict[str, t.Dict[int, int]]:
    """Number of records per split containing each class."""
    counts: t.Dict[str, Counter] = {split: Counter() for split in SPLITS}
    for record in manifest.records:
        counts[record.split].update(record.classes)
    return {split: dict(sorted(counter.items())) for split, counter in counts.items()}
