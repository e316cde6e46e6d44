from unittest import TestCase

import numpy as np

from stencil.attention import AttentionCapture
from stencil.denoiser import Denoiser, DenoiserConfig, sinusoidal_features, time_embed
from stencil.exceptions import ConfigError, ContractError, DimensionError
from stencil.tensor import Tensor, no_grad


SMALL = DenoiserConfig(
    image_size=8,
    base_channels=8,
    channel_mult=(1, 2),
    num_res_blocks=1,
    attention_resolutions=(8, 4),
    text_dim=8,
    max_length=6,
    timesteps=50
)


class DenoiserConfigTests(TestCase):
    def test_defaults(self):
        config = DenoiserConfig()
        self.assertEqual(config.resolutions, (32, 16, 8))
        self.assertEqual(config.time_dim, 128)
        self.assertEqual(config.channels(2), 64)

    def test_invalid(self):
        with self.assertRaises(ConfigError):
            DenoiserConfig(image_size=30)
        with self.assertRaises(ConfigError):
            DenoiserConfig(attention_resolutions=(4,))
        with self.assertRaises(ConfigError):
            DenoiserConfig(base_channels=7)

    def test_json(self):
        self.assertEqual(DenoiserConfig.from_json(SMALL.to_json()), SMALL)
        self.assertEqual(DenoiserConfig.from_json(None), DenoiserConfig())
        with self.assertRaises(ConfigError):
            DenoiserConfig.from_json({'depth': 3})

    def test_parameter_count(self):
        for config in (SMALL, DenoiserConfig(), DenoiserConfig(heads=2, num_res_blocks=1, attention_resolutions=(8,))):
            self.assertEqual(Denoiser(config).parameter_count(), config.parameter_count())


class DenoiserTests(TestCase):
    def setUp(self):
        self.rng = np.random.default_rng(0)
        self.model = Denoiser(SMALL, seed=1)
        self.z = self.rng.standard_normal((2, 3, 8, 8))
        self.text = self.rng.standard_normal((6, 8))

    def layout(self):
        layout = np.ones((6, 8, 8))
        layout[1, :, :4] = 0.0
        layout[2, :, 4:] = 0.0
        return layout

    def test_forward__shape(self):
        with no_grad():
            eps = self.model(Tensor(self.z), 10, self.text)
        self.assertEqual(eps.shape, (2, 3, 8, 8))
        self.assertTrue(np.all(np.isfinite(eps.data)))

    def test_all_ones_layout__bitwise(self):
        with no_grad():
            plain = self.model(Tensor(self.z), 10, self.text).data
            rectified = self.model(Tensor(self.z), 10, self.text, layout=np.ones((6, 8, 8))).data
        self.assertTrue(np.array_equal(plain, rectified))

    def test_layout_changes_prediction(self):
        with no_grad():
            plain = self.model(Tensor(self.z), 10, self.text).data
            rectified = self.model(Tensor(self.z), 10, self.text, layout=self.layout()).data
        self.assertFalse(np.array_equal(plain, rectified))

    def test_deterministic(self):
        other = Denoiser(SMALL, seed=1)
        with no_grad():
            first = self.model(Tensor(self.z), [3, 7], self.text, layout=self.layout()).data
            second = other(Tensor(self.z), [3, 7], self.text, layout=self.layout()).data
        self.assertTrue(np.array_equal(first, second))
        self.assertFalse(np.array_equal(Denoiser(SMALL, seed=2).conv_in.weight.data, other.conv_in.weight.data))

    def test_batched_inputs(self):
        texts = np.stack([self.text, self.text])
        layouts = np.stack([self.layout(), np.ones((6, 8, 8))])
        with no_grad():
            batched = self.model(Tensor(self.z), np.array([5, 5]), texts, layout=layouts).data
            single = self.model(Tensor(self.z[:1]), 5, self.text, layout=self.layout()).data
        np.testing.assert_allclose(batched[:1], single, atol=1e-10)

    def test_token_permutation(self):
        permutation = self.rng.permutation(6)
        with no_grad():
            first = self.model(Tensor(self.z), 10, self.text, layout=self.layout()).data
            second = self.model(
                Tensor(self.z), 10, self.text[permutation], layout=self.layout()[permutation]
            ).data
        np.testing.assert_allclose(first, second, atol=1e-10)

    def test_gradient_reaches_every_parameter(self):
        eps = self.model(Tensor(self.z), 10, self.text, layout=self.layout())
        ((eps - Tensor(self.z)) ** 2).mean().backward()
        for name, parameter in self.model.named_parameters():
            self.assertIsNotNone(parameter.grad, name)
            self.assertTrue(np.all(np.isfinite(parameter.grad)), name)

    def test_attention_layers(self):
        self.assertListEqual(
            self.model.attention_layers(),
            ['down.0.attn.0', 'down.1.attn.0', 'mid_attn', 'up.0.attn.0', 'up.1.attn.0']
        )

    def test_probe(self):
        capture = AttentionCapture()
        capture.set_step(3)
        with no_grad():
            self.model(Tensor(self.z), 10, self.text, layout=self.layout(), probe=capture)
        self.assertListEqual(capture.seen_layers, self.model.attention_layers())
        event = capture.events[('down.1.attn.0', 3)]
        self.assertEqual(event.scores.shape, (2, 6, 4, 4))
        self.assertTrue(np.all(event.weights[:, 1, :, :2] == 0.0))
        self.assertTrue(np.all(event.weights[:, 2, :, 2:] == 0.0))

    def test_shape_errors(self):
        with self.assertRaises(DimensionError):
            self.model(Tensor(np.zeros((2, 3, 4, 4))), 0, self.text)
        with self.assertRaises(DimensionError):
            self.model(Tensor(self.z), 0, np.zeros((5, 8)))
        with self.assertRaises(DimensionError):
            self.model(Tensor(self.z), 0, self.text, layout=np.ones((6, 4, 4)))
        with self.assertRaises(DimensionError):
            self.model(Tensor(self.z), [1, 2, 3], self.text)


class TimeEmbeddingTests(TestCase):
    def test_sinusoidal_features(self):
        features = sinusoidal_features(0, 8)
        np.testing.assert_array_equal(features, [[0.0, 1.0] * 4])
        self.assertEqual(sinusoidal_features(np.array([1, 2, 3]), 8).shape, (3, 8))

    def test_time_embed(self):
        model = Denoiser(SMALL)
        embedding = time_embed(model, np.array([0, 49]))
        self.assertEqual(embedding.shape, (2, SMALL.time_dim))
        self.assertFalse(np.allclose(embedding.data[0], embedding.data[1]))

    def test_time_embed__distinct_timesteps(self):
        embedding = time_embed(Denoiser(SMALL), np.arange(SMALL.timesteps)).data
        distances = np.abs(embedding[:, None, :] - embedding[None, :, :]).max(axis=-1)
        np.fill_diagonal(distances, np.inf)
        self.assertGreater(distances.min(), 1e-9)

    def test_time_embed__out_of_range(self):
        model = Denoiser(SMALL)
        for t in (-1, 50, 1.5):
            with self.assertRaises(ContractError):
                time_embed(model, t)
