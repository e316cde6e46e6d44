import csv
import logging
import math
import typing as t
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from tqdm import tqdm

from ..denoiser import Denoiser, save_checkpoint
from ..exceptions import ConfigError, StencilIOError, TrainingDivergenceError
from ..layout import LabelMap, expand_layout
from ..tensor import Adam, AdamState, DEFAULT_LR
from ..textcond import TextEncoder, Vocabulary, build_prompt_from_layout, build_text_prompt, null_prompt
from ..utilities import Timer, from_section, to_section
from .objective import DEFAULT_P_UNCOND, TrainingBatch, training_loss
from .schedule import NoiseSchedule


logger = logging.getLogger(__name__)

MODES = ('pretrain', 'finetune')


@dataclass(frozen=True)
class TrainingConfig:
    steps: int = 1000
    batch_size: int = 8
    lr: float = DEFAULT_LR
    log_every: int = 100
    checkpoint_every: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.steps < 0 or self.batch_size < 1 or self.log_every < 1 or self.checkpoint_every < 1:
            raise ConfigError('steps must be >= 0; batch_size, log_every and checkpoint_every >= 1.')
        if not self.lr > 0:
            raise ConfigError(f'lr must be positive, got {self.lr}.')

    def to_json(self):
        return to_section(self)

    @classmethod
    def from_json(cls, obj: t.Optional[t.Mapping[str, t.Any]]):
        return from_section(cls, obj, 'training')


@dataclass(frozen=True)
class Example:
    """One training pair: image (C, H, W) in [-1, 1], its label map and caption."""
    image: np.ndarray
    label_map: LabelMap
    caption: str


@dataclass(frozen=True)
class PreparedExample:
    z0: np.ndarray
    text: np.ndarray
    layout: t.Optional[np.ndarray]


def prepare_example(example: Example, mode: str, vocab: Vocabulary, encoder: TextEncoder) -> PreparedExample:
    """Pretraining conditions on the caption alone; fine-tuning on the stacked concepts and the layout."""
    if mode == 'pretrain':
        prompt = build_text_prompt(example.caption, vocab, encoder.max_length)
        return PreparedExample(example.image, encoder.encode(prompt).values, None)
    prompt = build_prompt_from_layout(example.label_map, vocab, max_length=encoder.max_length)
    layout = expand_layout(example.label_map, prompt)
    return PreparedExample(example.image, encoder.encode(prompt).values, layout.channels)


class Trainer:
    """Minimizes the noise-prediction loss with Adam.

    Writes "step,loss" rows to <out_dir>/<mode>-loss.csv, a checkpoint every
    checkpoint_every steps and a final <out_dir>/<mode>.ckpt.
    """

    def __init__(
        self,
        model: Denoiser,
        encoder: TextEncoder,
        vocab: Vocabulary,
        schedule: NoiseSchedule,
        config: TrainingConfig,
        mode: str,
        p_uncond: float = DEFAULT_P_UNCOND,
        strength: float = math.inf,
        optimizer_state: AdamState = None,
        progress: bool = False
    ):
        if mode not in MODES:
            raise ConfigError(f'Unknown training mode "{mode}".')
        self.model = model
        self.encoder = encoder
        self.vocab = vocab
        self.schedule = schedule
        self.config = config
        self.mode = mode
        self.p_uncond = p_uncond
        self.strength = strength
        self.progress = progress
        self.optimizer = Adam(model.named_parameters(), lr=config.lr)
        if optimizer_state is not None:
            self.optimizer.state = optimizer_state
        self.null_text = encoder.encode(null_prompt(vocab, encoder.max_length)).values

    def _batch(self, examples: t.Sequence[PreparedExample], rng: np.random.Generator) -> TrainingBatch:
        chosen = [examples[i] for i in rng.integers(0, len(examples), size=self.config.batch_size)]
        layout = None if self.mode == 'pretrain' else np.stack([example.layout for example in chosen])
        return TrainingBatch(
            z0=np.stack([example.z0 for example in chosen]),
            text=np.stack([example.text for example in chosen]),
            layout=layout
        )

    def _save(self, path: Path) -> Path:
        return save_checkpoint(path, self.model, self.encoder.config(), self.optimizer.state)

    def run(self, examples: t.Sequence[Example], out_dir: t.Union[str, Path]) -> Path:
        """Train for config.steps steps and return the final checkpoint path.

        :raises TrainingDivergenceError: When the loss or a gradient stops being finite.
        """
        out_dir = Path(out_dir)
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as ex:
            raise StencilIOError(f'Cannot create {out_dir}: {ex}') from ex
        if self.config.steps and not examples:
            raise ConfigError(f'No {self.mode} examples to train on.')

        prepared = [prepare_example(example, self.mode, self.vocab, self.encoder) for example in examples]
        rng = np.random.default_rng(self.config.seed)
        loss_path = out_dir / f'{self.mode}-loss.csv'

        with Timer('train.%s', self.mode, log_level=logging.INFO) as timer, open(loss_path, 'w', newline='', encoding='utf-8') as loss_file:
            writer = csv.writer(loss_file)
            writer.writerow(['step', 'loss'])
            for step in tqdm(range(1, self.config.steps + 1), desc=self.mode, disable=not self.progress):
                self.optimizer.zero_grad()
                try:
                    loss = training_loss(
                        self.model,
                        self._batch(prepared, rng),
                        self.schedule,
                        rng,
                        p_uncond=self.p_uncond,
                        null_text=self.null_text,
                        strength=self.strength
                    )
                    loss.backward()
                    self.optimizer.step()
                except TrainingDivergenceError as ex:
                    logger.error('Training diverged at step %d: %s', step, ex.message)
                    raise
                writer.writerow([step, repr(loss.item())])

                if step % self.config.log_every == 0:
                    loss_file.flush()
                    logger.info('%s step %d/%d loss %.6f (%.2f steps/s)', self.mode, step, self.config.steps, loss.item(), timer.rate(step))
                if step % self.config.checkpoint_every == 0 and step != self.config.steps:
                    self._save(out_dir / f'{self.mode}-{step:06d}.ckpt')

        final = self._save(out_dir / f'{self.mode}.ckpt')
        logger.info('Final %s checkpoint: %s', self.mode, final)
        return final
