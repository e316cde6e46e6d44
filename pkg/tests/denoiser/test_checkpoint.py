import struct
import tempfile
from pathlib import Path
from unittest import TestCase

import numpy as np

from stencil.denoiser import (
    Checkpoint,
    Denoiser,
    decode_checkpoint,
    encode_checkpoint,
    load_checkpoint,
    save_checkpoint
)
from stencil.exceptions import FormatError, StencilIOError
from stencil.tensor import Adam, Tensor, no_grad

from .test_unet import SMALL


class CheckpointTests(TestCase):
    def setUp(self):
        self.model = Denoiser(SMALL, seed=4)
        self.encoder = {'vocab_size': 35, 'max_length': 6, 'dim': 8, 'seed': 0}

    def trained_optimizer(self):
        optimizer = Adam(self.model.named_parameters(), lr=1e-3)
        z = np.random.default_rng(0).standard_normal((1, 3, 8, 8))
        eps = self.model(Tensor(z), 1, np.zeros((6, 8)))
        (eps ** 2).mean().backward()
        optimizer.step()
        return optimizer

    def test_round_trip(self):
        optimizer = self.trained_optimizer()
        checkpoint = decode_checkpoint(encode_checkpoint(
            Checkpoint(SMALL, self.encoder, self.model.state_dict(), optimizer.state)
        ))
        self.assertEqual(checkpoint.config, SMALL)
        self.assertEqual(checkpoint.text_encoder, self.encoder)
        self.assertListEqual(list(checkpoint.state), [name for name, _ in self.model.named_parameters()])
        self.assertEqual(checkpoint.optimizer.step, 1)
        for name, parameter in self.model.named_parameters():
            self.assertTrue(np.array_equal(checkpoint.state[name], parameter.data))
            self.assertTrue(np.array_equal(checkpoint.optimizer.m[name], optimizer.state.m[name]))

        rebuilt = checkpoint.build()
        z = np.ones((1, 3, 8, 8))
        with no_grad():
            self.assertTrue(np.array_equal(
                rebuilt(Tensor(z), 7, np.ones((6, 8))).data,
                self.model(Tensor(z), 7, np.ones((6, 8))).data
            ))

    def test_without_optimizer(self):
        data = encode_checkpoint(Checkpoint(SMALL, self.encoder, self.model.state_dict()))
        self.assertEqual(data[:4], b'FSN1')
        self.assertIsNone(decode_checkpoint(data).optimizer)

    def test_invalid(self):
        data = encode_checkpoint(Checkpoint(SMALL, self.encoder, self.model.state_dict()))
        for broken in (
            b'XXXX' + data[4:],
            data[:4] + struct.pack('<I', 2) + data[8:],
            data[:-8],
            data + b'\x00',
            data[:10]
        ):
            with self.assertRaises(FormatError):
                decode_checkpoint(broken)

    def test_files(self):
        with tempfile.TemporaryDirectory() as directory:
            path = save_checkpoint(Path(directory) / 'runs' / 'model.ckpt', self.model, self.encoder)
            self.assertTrue(path.exists())
            self.assertEqual(load_checkpoint(path).config, SMALL)
            path.write_bytes(b'FSN1')
            with self.assertRaises(FormatError):
                load_checkpoint(path)
            with self.assertRaises(StencilIOError):
                load_checkpoint(Path(directory) / 'missing.ckpt')
