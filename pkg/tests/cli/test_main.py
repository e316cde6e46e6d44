import argparse
import contextlib
import io
import json
import os
import tempfile
import unittest
from pathlib import Path
from unittest import TestCase

import numpy as np

from stencil.cli import main
from stencil.cli.commands import _heatmaps, apply_binds, build_sample_prompt
from stencil.exceptions import MissingConceptError, UsageError
from stencil.layout import LabelMap
from stencil.scenes import DatasetManifest
from stencil.textcond import DEFAULT_VOCABULARY, GLOBAL, Binding, build_prompt_from_layout, positions_of


def run(*argv):
    """(exit code, stdout, stderr) of one invocation."""
    stdout, stderr = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(stdout), contextlib.redirect_stderr(stderr):
        code = main(['--quiet', *argv])
    return code, stdout.getvalue(), stderr.getvalue()


def error_of(stderr):
    # Log records may precede the JSON error line.
    return json.loads(stderr.strip().splitlines()[-1])


class MainTests(TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.root = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def test_bad_arguments(self):
        code, _, stderr = run('gen-data', '--out', str(self.root))
        self.assertEqual(code, 1)
        self.assertEqual(error_of(stderr)['error'], 'UsageError')

        code, _, _ = run('nope')
        self.assertEqual(code, 1)

    def test_bad_holdout(self):
        code, _, stderr = run('gen-data', '--out', str(self.root), '--n', '1', '--holdout', 'purple square')
        self.assertEqual(code, 1)
        self.assertEqual(error_of(stderr)['error'], 'UsageError')

    def test_missing_checkpoint(self):
        labels = self.root / 'labels.pgm'
        labels.write_bytes(b'P5\n2 2\n255\n\x00\x01\x01\x00')
        code, _, stderr = run(
            'sample', '--checkpoint', str(self.root / 'absent.ckpt'),
            '--labels', str(labels), '--out', str(self.root / 'out.ppm')
        )
        self.assertEqual(code, 2)
        self.assertIn('error', error_of(stderr))

    def test_missing_manifest(self):
        code, _, stderr = run('eval', '--bypass', '--out', str(self.root / 'report.json'))
        self.assertEqual(code, 1)
        self.assertEqual(error_of(stderr)['error'], 'ConfigError')

    def test_gen_data__empty(self):
        code, stdout, _ = run('gen-data', '--out', str(self.root), '--n', '0')
        self.assertEqual(code, 0)
        summary = json.loads(stdout)
        self.assertEqual(summary['records'], {'pretrain': 0, 'finetune': 0, 'test': 0})
        self.assertEqual(DatasetManifest.load(self.root).records, [])

    def test_gen_data__bypass_eval(self):
        code, stdout, _ = run('gen-data', '--out', str(self.root), '--n', '10', '--seed', '2', '--holdout', 'blue triangle')
        self.assertEqual(code, 0)
        summary = json.loads(stdout)
        self.assertEqual(summary['holdout'], ['blue triangle'])
        self.assertNotIn('blue triangle', summary['census']['finetune'])

        images = 0
        for split in ('pretrain', 'finetune', 'test'):
            report_path = self.root / f'{split}.json'
            code, _, _ = run(
                'eval', '--bypass', '--manifest', str(self.root),
                '--split', split, '--out', str(report_path), '--workers', '2'
            )
            self.assertEqual(code, 0)
            report = json.loads(report_path.read_text(encoding='utf-8'))
            if report['n_images']:
                # Rendered scenes use exact palette colors.
                self.assertEqual(report['miou'], 1.0)
                self.assertEqual(report['pixel_acc'], 1.0)
            images += report['n_images']
        self.assertEqual(images, summary['records']['pretrain'] + summary['records']['finetune'] + summary['records']['test'])


SMALL_RUN = {
    'denoiser': {
        'image_size': 32, 'base_channels': 8, 'channel_mult': [1, 2], 'num_res_blocks': 1,
        'attention_resolutions': [16], 'text_dim': 8, 'max_length': 16, 'timesteps': 50
    },
    'schedule': {'T': 50},
    'sampler': {'method': 'ddim', 'steps': 4, 'scale': 2.0},
    'training': {'steps': 2, 'batch_size': 2, 'log_every': 1, 'checkpoint_every': 2}
}


@unittest.skipUnless(os.environ.get('STENCIL_ACCEPTANCE') == '1', 'set STENCIL_ACCEPTANCE=1 to run the full pipeline')
class BindTests(TestCase):
    def setUp(self):
        # Classes 1 (red square) and 9 (red circle) share "red".
        self.label_map = LabelMap([[1, 9]])
        self.vocab = DEFAULT_VOCABULARY()

    def bindings_of(self, prompt, word):
        return [prompt.bindings[position] for position in positions_of(prompt, word)]

    def test_bind__only_extra_text(self):
        prompt = build_prompt_from_layout(self.label_map, self.vocab, extra_text='red', max_length=16)
        self.assertEqual(
            self.bindings_of(prompt, 'red'), [Binding.concept(1), Binding.concept(9), GLOBAL]
        )

        bound = apply_binds(prompt, 'red=9', self.label_map)
        self.assertEqual(
            self.bindings_of(bound, 'red'), [Binding.concept(1), Binding.concept(9), Binding.concept(9)]
        )
        self.assertEqual(self.bindings_of(bound, 'square'), [Binding.concept(1)])

    def test_bind__concept_word(self):
        prompt = build_prompt_from_layout(self.label_map, self.vocab, extra_text='red', max_length=16)
        with self.assertRaises(UsageError):
            apply_binds(prompt, 'square=9', self.label_map)

    def test_bind__no_extra_text(self):
        prompt = build_prompt_from_layout(self.label_map, self.vocab, max_length=16)
        with self.assertRaises(UsageError):
            apply_binds(prompt, 'red=9', self.label_map)

    def test_bind__missing_class(self):
        prompt = build_prompt_from_layout(self.label_map, self.vocab, extra_text='red', max_length=16)
        with self.assertRaises(MissingConceptError):
            apply_binds(prompt, 'red=19', self.label_map)

    def test_no_layout__all_global(self):
        args = argparse.Namespace(text='red', concept=[], bind='', no_layout=True)
        prompt = build_sample_prompt(args, self.label_map, self.vocab, 16)
        self.assertEqual(prompt.text, 'red square red circle red')
        self.assertTrue(all(binding.is_global for binding in prompt.bindings))

        args.bind = 'red=9'
        with self.assertRaises(UsageError):
            build_sample_prompt(args, self.label_map, self.vocab, 16)


class HeatmapTests(TestCase):
    def test_masked_scores_are_black(self):
        scores = np.array([[[-np.inf, -2.0], [0.0, 2.0]]])
        weights = np.array([[[0.0, 0.25], [0.5, 1.0]]])
        score_bytes, weight_bytes = _heatmaps(scores, weights)
        np.testing.assert_array_equal(score_bytes, [[[0, 1], [128, 255]]])
        np.testing.assert_array_equal(weight_bytes, [[[0, 64], [128, 255]]])

    def test_constant_scores(self):
        score_bytes, _ = _heatmaps(np.array([[[-np.inf, 3.0]]]), np.zeros((1, 1, 2)))
        np.testing.assert_array_equal(score_bytes, [[[0, 255]]])


class PipelineTests(TestCase):
    def test_pipeline(self):
        with tempfile.TemporaryDirectory() as tmp:
            root = Path(tmp)
            config = root / 'run.json'
            config.write_text(json.dumps(SMALL_RUN), encoding='utf-8')
            data = root / 'data'

            self.assertEqual(run('gen-data', '--out', str(data), '--n', '20', '--seed', '1')[0], 0)
            manifest = DatasetManifest.load(data)

            code, stdout, _ = run('--config', str(config), 'pretrain', '--manifest', str(data), '--out', str(root / 'pre'))
            self.assertEqual(code, 0)
            checkpoint = stdout.strip().splitlines()[-1]
            self.assertTrue(Path(checkpoint).exists())

            code, stdout, _ = run(
                '--config', str(config), 'finetune', '--init', checkpoint,
                '--manifest', str(data), '--out', str(root / 'fine')
            )
            self.assertEqual(code, 0)
            checkpoint = stdout.strip().splitlines()[-1]

            labels = str(manifest.path(manifest.records[0].labels))
            code, _, _ = run(
                '--config', str(config), 'sample', '--checkpoint', checkpoint,
                '--labels', labels, '--out', str(root / 'sample.ppm')
            )
            self.assertEqual(code, 0)
            self.assertTrue((root / 'sample.ppm').exists())

            code, _, _ = run(
                '--config', str(config), 'inspect-attn', '--checkpoint', checkpoint,
                '--labels', labels, '--step', '1', '--out', str(root / 'attn')
            )
            self.assertEqual(code, 0)
            self.assertTrue(any((root / 'attn').glob('*-scores.pgm')))

            code, _, _ = run(
                '--config', str(config), 'eval', '--checkpoint', checkpoint, '--manifest', str(data),
                '--split', 'pretrain', '--limit', '2', '--samples-per-layout', '2', '--out', str(root / 'report.json')
            )
            self.assertEqual(code, 0)
            report = json.loads((root / 'report.json').read_text(encoding='utf-8'))
            self.assertIn('diversity', report)
