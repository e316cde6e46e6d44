import argparse
import json
import logging
import sys
import typing as t
from dataclasses import replace
from pathlib import Path

import numpy as np

from .. import settings
from ..attention import AttentionCapture, parse_overrides
from ..denoiser import Checkpoint, Denoiser, load_checkpoint
from ..diffusion import Example, SampleConditioning, Trainer, from_image, sample, to_image
from ..evaluation import ConfusionAccumulator, EvalReport, diversity, oracle_segment
from ..exceptions import ConfigError, MissingConceptError, UsageError
from ..layout import (
    LabelMap,
    expand_layout,
    fit_label_map,
    load_image,
    load_label_map,
    save_image,
    write_netpbm
)
from ..scenes import DatasetManifest, Record, census, concept, generate_dataset, holdout_filter, parse_combos
from ..tensor import nearest_indices
from ..textcond import (
    Binding,
    Prompt,
    TextEncoder,
    Vocabulary,
    build_prompt_from_layout,
    build_text_prompt,
    null_prompt,
    positions_of,
    rebind
)
from ..utilities import Timer, multithread
from .config import RunConfig, parse_strength


logger = logging.getLogger(__name__)


def _progress(args: argparse.Namespace) -> bool:
    return not getattr(args, 'quiet', False) and sys.stderr.isatty()


def _config(args: argparse.Namespace) -> RunConfig:
    return RunConfig.load(getattr(args, 'config', None))


def load_examples(manifest: DatasetManifest, split: str) -> t.List[Example]:
    return [
        Example(
            image=from_image(load_image(manifest.path(record.image))),
            label_map=load_label_map(manifest.path(record.labels)),
            caption=record.caption
        )
        for record in manifest.split(split)
    ]


def _manifest(args: argparse.Namespace, config: RunConfig) -> DatasetManifest:
    path = getattr(args, 'manifest', None) or config.manifest
    if path is None:
        raise ConfigError('No manifest given; pass --manifest or set "manifest" in the config.')
    return DatasetManifest.load(path)


def _encoder(checkpoint: Checkpoint, vocab: Vocabulary) -> TextEncoder:
    encoder = TextEncoder.from_config(checkpoint.text_encoder)
    if encoder.vocab_size != vocab.size:
        raise ConfigError(
            f'The checkpoint was trained with {encoder.vocab_size} words, the vocabulary has {vocab.size}.'
        )
    return encoder


# --- gen-data ---
def cmd_gen_data(args: argparse.Namespace) -> int:
    held_out = parse_combos(args.holdout or '')
    with Timer('gen_data', log_level=logging.INFO):
        manifest = generate_dataset(args.out, args.n, args.seed, max_workers=args.workers)
        manifest = holdout_filter(manifest, held_out)
        manifest.save(args.out)

    counts = census(manifest)
    print(json.dumps({
        'records': {split: len(manifest.split(split)) for split in counts},
        'census': {split: {concept(class_id): n for class_id, n in classes.items()} for split, classes in counts.items()},
        'holdout': [concept(class_id) for class_id in manifest.holdout]
    }, indent=2))
    return 0


# --- pretrain / finetune ---
def _train(args: argparse.Namespace, mode: str, model: Denoiser, encoder: TextEncoder, config: RunConfig, vocab: Vocabulary) -> int:
    if args.steps is not None:
        config = config.with_overrides(training=replace(config.training, steps=args.steps))
    trainer = Trainer(
        model, encoder, vocab, config.schedule, config.training, mode,
        p_uncond=config.p_uncond,
        strength=config.strength,
        progress=_progress(args)
    )
    final = trainer.run(load_examples(_manifest(args, config), mode), args.out or config.out_dir)
    print(final)
    return 0


def cmd_pretrain(args: argparse.Namespace) -> int:
    """Train with plain cross-attention on captions (no layouts)."""
    config = _config(args)
    vocab = config.load_vocabulary()
    model = Denoiser(config.denoiser, seed=config.seed)
    return _train(args, 'pretrain', model, config.text_encoder(vocab), config, vocab)


def cmd_finetune(args: argparse.Namespace) -> int:
    """Continue from a pretrained checkpoint with rectified cross-attention on layouts."""
    config = _config(args)
    vocab = config.load_vocabulary()
    checkpoint = load_checkpoint(args.init)
    if checkpoint.config != config.denoiser:
        logger.info('Using the denoiser configuration stored in %s.', args.init)
        config = config.with_overrides(denoiser=checkpoint.config)
    return _train(args, 'finetune', checkpoint.build(), _encoder(checkpoint, vocab), config, vocab)


# --- sample / inspect-attn ---
def parse_concepts(items: t.Sequence[str]) -> t.Dict[int, str]:
    """["7=striped red square", ...] -> {7: "striped red square"}."""
    concepts = {}
    for item in items or ():
        class_id, _, words = item.partition('=')
        if not class_id.strip().isdigit() or not words.strip():
            raise UsageError(f'Malformed --concept "{item}"; expected "class=words".')
        concepts[int(class_id)] = words.strip()
    return concepts


def _positions(prompt: Prompt, operand: str, free_only: bool = False) -> t.List[int]:
    """Prompt positions named by an int position, a word, or "#class".

    With `free_only`, a word only names positions still bound Global.
    """
    operand = operand.strip()
    if operand.startswith('#') and operand[1:].isdigit():
        class_id = int(operand[1:])
        positions = [
            position for position, binding in enumerate(prompt.bindings) if binding.class_id == class_id
        ]
    elif operand.isdigit():
        positions = [int(operand)] if int(operand) < prompt.length else []
    else:
        positions = positions_of(prompt, operand)
        if free_only:
            positions = [position for position in positions if prompt.bindings[position].is_global]
    if not positions:
        raise UsageError(f'"{operand}" names no position of the prompt "{prompt.text}".')
    return positions


def apply_binds(prompt: Prompt, text: str, label_map: LabelMap) -> Prompt:
    """Bind words of the extra text to classes: "striped=7,blue=19".

    Words already bound to a concept keep their class.
    """
    classes = set(label_map.classes())
    for item in filter(None, (item.strip() for item in (text or '').split(','))):
        word, _, class_id = item.partition('=')
        if not class_id.strip().isdigit():
            raise UsageError(f'Malformed --bind "{item}"; expected "word=class".')
        class_id = int(class_id)
        if class_id not in classes:
            raise MissingConceptError(class_id)
        for position in _positions(prompt, word, free_only=True):
            prompt = rebind(prompt, (position, position + 1), Binding.concept(class_id))
    return prompt


def build_sample_prompt(args: argparse.Namespace, label_map: LabelMap, vocab: Vocabulary, max_length: int) -> Prompt:
    prompt = build_prompt_from_layout(
        label_map, vocab,
        extra_text=args.text or '',
        max_length=max_length,
        concept_text=parse_concepts(args.concept)
    )
    if args.no_layout:
        if args.bind:
            raise UsageError('--bind needs a layout; drop --no-layout.')
        # Same words, all Global.
        return build_text_prompt(prompt.text, vocab, max_length)
    return apply_binds(prompt, args.bind, label_map)


def print_prompt(prompt: Prompt):
    print('prompt: ' + ' '.join(prompt.words[:prompt.length]))
    for position, word, binding in prompt.binding_table():
        print(f'{position:>3}  {word:<12} {binding}')


def _prepare_sampling(args: argparse.Namespace):
    config = _config(args)
    config = config.with_overrides(
        sampler=replace(config.sampler, **{key: value for key, value in (
            ('method', args.method), ('steps', args.steps), ('scale', args.scale), ('seed', args.seed)
        ) if value is not None}),
        strength=parse_strength(args.strength) if args.strength is not None else None
    )
    vocab = config.load_vocabulary()
    checkpoint = load_checkpoint(args.checkpoint)
    model = checkpoint.build()
    encoder = _encoder(checkpoint, vocab)

    label_map = load_label_map(args.labels)
    fitted = fit_label_map(label_map, model.config.image_size)
    prompt = build_sample_prompt(args, fitted, vocab, encoder.max_length)
    overrides = parse_overrides(args.override, lambda operand: _positions(prompt, operand)) if args.override else None

    conditioning = SampleConditioning(
        text=encoder.encode(prompt),
        null_text=encoder.encode(null_prompt(vocab, encoder.max_length)),
        layout=None if args.no_layout else expand_layout(fitted, prompt),
        strength=config.strength,
        overrides=overrides
    )
    shape = (1, model.config.in_channels, model.config.image_size, model.config.image_size)
    return config, model, prompt, label_map, conditioning, config.sampler, shape


def cmd_sample(args: argparse.Namespace) -> int:
    config, model, prompt, label_map, conditioning, sampler, shape = _prepare_sampling(args)
    print_prompt(prompt)
    image = to_image(sample(model, conditioning, config.schedule, sampler, shape, progress=_progress(args))[0])
    if image.shape[:2] != label_map.shape:
        rows = nearest_indices(image.shape[0], label_map.height)[:, None]
        cols = nearest_indices(image.shape[1], label_map.width)[None, :]
        image = image[rows, cols]
    save_image(image, args.out)
    print(args.out)
    return 0


def _heatmaps(scores: np.ndarray, weights: np.ndarray) -> t.Tuple[np.ndarray, np.ndarray]:
    """Byte maps of C x H x W scores (finite range stretched to 1-255, -inf -> 0) and weights."""
    finite = np.isfinite(scores)
    score_bytes = np.zeros(scores.shape, dtype=np.uint8)
    if finite.any():
        low, high = scores[finite].min(), scores[finite].max()
        scaled = (scores - low) / (high - low) if high > low else np.ones(scores.shape)
        score_bytes[finite] = 1 + np.round(scaled[finite] * 254.0).astype(np.uint8)
    weight_bytes = np.round(np.clip(weights, 0.0, 1.0) * 255.0).astype(np.uint8)
    return score_bytes, weight_bytes


def cmd_inspect_attn(args: argparse.Namespace) -> int:
    config, model, prompt, _, conditioning, sampler, shape = _prepare_sampling(args)
    layers = model.attention_layers()
    if args.layer is not None and args.layer not in layers:
        raise UsageError(f'Unknown layer "{args.layer}"; choose one of {", ".join(layers)}.')
    if not 0 <= args.step < sampler.steps:
        raise UsageError(f'--step must lie in [0, {sampler.steps}).')

    capture = AttentionCapture(layers=None if args.layer is None else [args.layer], steps=[args.step])
    sample(model, conditioning, config.schedule, sampler, shape, probe=capture, progress=_progress(args))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for (layer, step), event in sorted(capture.events.items()):
        scores, weights = event.scores[0], event.weights[0]
        if scores.ndim == 4:
            # Several heads share one layout; show their mean.
            scores, weights = scores.mean(axis=0), weights.mean(axis=0)
        score_bytes, weight_bytes = _heatmaps(scores, weights)
        for position in range(prompt.length):
            stem = f'{layer}-step{step:03d}-{position:02d}-{prompt.words[position].strip("<>")}'
            write_netpbm(score_bytes[position], out / f'{stem}-scores.pgm')
            write_netpbm(weight_bytes[position], out / f'{stem}-weights.pgm')
            written.append(stem)
    print_prompt(prompt)
    print(json.dumps({'layers': layers, 'written': len(written), 'out': str(out)}, indent=2))
    return 0


# --- eval ---
def _evaluate_shard(
    records: t.Sequence[Record],
    manifest: DatasetManifest,
    model: t.Optional[Denoiser],
    encoder: t.Optional[TextEncoder],
    vocab: Vocabulary,
    config: RunConfig,
    samples_per_layout: int,
    bypass: bool
) -> t.Tuple[ConfusionAccumulator, t.List[float]]:
    accumulator, diversities = ConfusionAccumulator(), []
    for record in records:
        label_map = load_label_map(manifest.path(record.labels))
        if bypass:
            accumulator.update(oracle_segment(load_image(manifest.path(record.image))), label_map)
            continue

        fitted = fit_label_map(label_map, model.config.image_size)
        prompt = build_prompt_from_layout(fitted, vocab, max_length=encoder.max_length)
        conditioning = SampleConditioning(
            text=encoder.encode(prompt),
            null_text=encoder.encode(null_prompt(vocab, encoder.max_length)),
            layout=expand_layout(fitted, prompt),
            strength=config.strength
        )
        shape = (1, model.config.in_channels, model.config.image_size, model.config.image_size)
        images = []
        for index in range(samples_per_layout):
            # Fixed per-record seeds make every shard reproducible.
            seed = config.sampler.seed + record.scene * samples_per_layout + index
            images.append(to_image(sample(model, conditioning, config.schedule, replace(config.sampler, seed=seed), shape)[0]))
        accumulator.update(oracle_segment(images[0]), fitted)
        if samples_per_layout > 1:
            diversities.append(diversity(images))
    return accumulator, diversities


def cmd_eval(args: argparse.Namespace) -> int:
    config = _config(args)
    vocab = config.load_vocabulary()
    manifest = _manifest(args, config)
    records = manifest.split(args.split)[:args.limit]
    if args.samples_per_layout < 1:
        raise UsageError('--samples-per-layout must be >= 1.')

    model = encoder = None
    if not args.bypass:
        if args.checkpoint is None:
            raise UsageError('--checkpoint is required unless --bypass is given.')
        checkpoint = load_checkpoint(args.checkpoint)
        model, encoder = checkpoint.build(), _encoder(checkpoint, vocab)

    workers = args.workers or settings.get_worker_count()
    shards = [list(shard) for shard in np.array_split(np.arange(len(records)), max(1, min(workers, len(records)))) if len(shard)]
    with Timer('eval', log_level=logging.INFO):
        results = multithread(
            lambda shard: _evaluate_shard(
                [records[i] for i in shard], manifest, model, encoder, vocab, config,
                args.samples_per_layout, args.bypass
            ),
            shards,
            max_workers=workers
        )

    accumulator, diversities = ConfusionAccumulator(), []
    for shard_accumulator, shard_diversities in results:
        accumulator = accumulator.merge(shard_accumulator)
        diversities += shard_diversities

    report = EvalReport.from_accumulator(accumulator, float(np.mean(diversities)) if diversities else None)
    report.save(args.out)
    print(json.dumps(report.to_json(), indent=2))
    return 0
