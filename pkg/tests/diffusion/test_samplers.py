from unittest import TestCase
from unittest.mock import Mock, patch

import numpy as np

from stencil.attention import AttentionCapture, MaskGuard
from stencil.denoiser import Denoiser
from stencil.diffusion import (
    GuidedNoise,
    NoiseSchedule,
    SampleConditioning,
    SamplerConfig,
    ddim_step,
    ddpm_step,
    from_image,
    plms_eps,
    predict_z0,
    q_sample,
    sample,
    sampling_timesteps,
    to_image
)
from stencil.exceptions import ConfigError, ContractError
from stencil.layout import ConceptLayout
from stencil.tensor import Tensor
from stencil.textcond import TextEmbeddings

from ..denoiser.test_unet import SMALL


def zero_model(z, t, text, **kwargs):
    return Tensor(np.zeros(np.shape(z)))


class SamplerStepTests(TestCase):
    def setUp(self):
        self.schedule = NoiseSchedule()
        self.rng = np.random.default_rng(0)

    def test_sampling_timesteps(self):
        pairs = sampling_timesteps(1000, 50)
        self.assertEqual(len(pairs), 50)
        self.assertEqual(pairs[0], (980, 960))
        self.assertEqual(pairs[-1], (0, -1))
        self.assertEqual(sampling_timesteps(1000, 1), [(0, -1)])
        self.assertEqual(len(sampling_timesteps(1000, 1000)), 1000)
        for steps in (0, 1001):
            with self.assertRaises(ContractError):
                sampling_timesteps(1000, steps)

    def test_ddim_inversion(self):
        z0 = self.rng.uniform(-1.0, 1.0, (2, 3, 4, 4))
        eps = self.rng.standard_normal(z0.shape)
        for t in (0, 1, 250, 500, 999):
            z_t = q_sample(self.schedule, z0, t, eps)
            self.assertLess(np.abs(ddim_step(self.schedule, z_t, eps, t, -1, clip=False) - z0).max(), 1e-10)

    def test_ddim_step__deterministic_path(self):
        z0 = self.rng.uniform(-1.0, 1.0, (1, 3, 4, 4))
        eps = self.rng.standard_normal(z0.shape)
        z_prev = ddim_step(self.schedule, q_sample(self.schedule, z0, 600, eps), eps, 600, 400)
        np.testing.assert_allclose(z_prev, q_sample(self.schedule, z0, 400, eps), atol=1e-10)

    def test_predict_z0__clamped(self):
        z0 = predict_z0(self.schedule, np.full(3, 5.0), np.zeros(3), 10)
        np.testing.assert_array_equal(z0, np.ones(3))

    def test_ddpm_step(self):
        z0 = self.rng.uniform(-1.0, 1.0, (1, 3, 4, 4))
        eps = self.rng.standard_normal(z0.shape)
        z_t = q_sample(self.schedule, z0, 20, eps)
        np.testing.assert_allclose(ddpm_step(self.schedule, z_t, eps, 20, -1, self.rng), z0, atol=1e-10)
        first = ddpm_step(self.schedule, z_t, eps, 20, 10, np.random.default_rng(1))
        second = ddpm_step(self.schedule, z_t, eps, 20, 10, np.random.default_rng(1))
        np.testing.assert_array_equal(first, second)

    def test_invalid_transition(self):
        with self.assertRaises(ContractError):
            ddim_step(self.schedule, np.zeros(2), np.zeros(2), 10, 10)
        with self.assertRaises(ContractError):
            ddpm_step(self.schedule, np.zeros(2), np.zeros(2), 10, -2, self.rng)

    def test_plms_eps__equal_history(self):
        eps = self.rng.standard_normal(5)
        for count in range(4):
            np.testing.assert_allclose(plms_eps(eps, [eps] * count), eps, atol=1e-12)

    def test_plms_eps__coefficients(self):
        eps, history = np.array([1.0]), [np.array([0.0])] * 3
        self.assertEqual(plms_eps(eps, history[:1])[0], 1.5)
        self.assertAlmostEqual(plms_eps(eps, history[:2])[0], 23.0 / 12.0)
        self.assertAlmostEqual(plms_eps(eps, history)[0], 55.0 / 24.0)

    def test_images(self):
        image = self.rng.standard_normal((8, 6, 3))
        self.assertEqual(from_image(image).shape, (3, 8, 6))
        np.testing.assert_array_equal(to_image(from_image(image)), image)


class SampleTests(TestCase):
    def setUp(self):
        self.schedule = NoiseSchedule(T=50)
        self.text = TextEmbeddings(np.random.default_rng(0).standard_normal((6, 8)))
        self.null_text = TextEmbeddings(np.zeros((6, 8)))
        layout = np.ones((6, 8, 8))
        layout[1, :, 4:] = 0.0
        self.conditioning = SampleConditioning(self.text, self.null_text, ConceptLayout(layout))
        self.shape = (1, 3, 8, 8)

    def test_config(self):
        self.assertEqual(SamplerConfig(), SamplerConfig(method='plms', steps=50, scale=2.0))
        for kwargs in ({'method': 'euler'}, {'steps': 0}, {'scale': -1.0}, {'eta': -0.5}):
            with self.assertRaises(ConfigError):
                SamplerConfig(**kwargs)

    def test_call_counts(self):
        for config, cond, uncond in (
            (SamplerConfig(method='ddim', steps=5, scale=2.0), 5, 5),
            (SamplerConfig(method='ddim', steps=5, scale=1.0), 5, 0),
            (SamplerConfig(method='ddpm', steps=7, scale=3.0), 7, 7),
            (SamplerConfig(method='plms', steps=10, scale=2.0), 11, 11),
        ):
            model = Mock(side_effect=zero_model)
            sample(model, self.conditioning, self.schedule, config, self.shape)
            conditional = sum(1 for call in model.call_args_list if call.kwargs)
            self.assertEqual((conditional, model.call_count - conditional), (cond, uncond), config)

    def test_unconditional_branch_sees_no_layout(self):
        model = Mock(side_effect=zero_model)
        noise_fn = GuidedNoise(model, self.conditioning, 2.0)
        noise_fn(np.zeros(self.shape), 10, 0)
        cond_call, uncond_call = model.call_args_list
        self.assertIs(cond_call.args[2], self.text)
        self.assertIs(cond_call.kwargs['layout'], self.conditioning.layout)
        self.assertIs(uncond_call.args[2], self.null_text)
        self.assertEqual(uncond_call.kwargs, {})
        self.assertEqual(noise_fn.calls, {'cond': 1, 'uncond': 1})

    def test_plms_fallback(self):
        model = Mock(side_effect=zero_model)
        with self.assertLogs('stencil.diffusion.samplers', level='WARNING'):
            sample(model, self.conditioning, self.schedule, SamplerConfig(steps=3, scale=1.0), self.shape)
        self.assertEqual(model.call_count, 3)

    def test_steps_exceed_schedule(self):
        with self.assertRaises(ContractError):
            sample(zero_model, self.conditioning, self.schedule, SamplerConfig(steps=51), self.shape)

    def test_reproducible(self):
        model = Denoiser(SMALL, seed=0)
        config = SamplerConfig(steps=4, seed=11)
        first = sample(model, self.conditioning, self.schedule, config, self.shape)
        second = sample(model, self.conditioning, self.schedule, config, self.shape)
        self.assertTrue(np.array_equal(first, second))
        self.assertEqual(first.shape, self.shape)
        self.assertTrue(np.all(np.abs(first) <= 1.0))
        other = sample(model, self.conditioning, self.schedule, SamplerConfig(steps=4, seed=12), self.shape)
        self.assertFalse(np.array_equal(first, other))

    def test_zero_scale_ignores_prompt(self):
        model = Denoiser(SMALL, seed=0)
        config = SamplerConfig(method='ddim', steps=4, scale=0.0)
        other = SampleConditioning(TextEmbeddings(np.ones((6, 8))), self.null_text, self.conditioning.layout)
        self.assertTrue(np.array_equal(
            sample(model, self.conditioning, self.schedule, config, self.shape),
            sample(model, other, self.schedule, config, self.shape)
        ))

    def test_probe_steps(self):
        model = Denoiser(SMALL, seed=0)
        capture = AttentionCapture(layers=['mid_attn'])
        sample(model, self.conditioning, self.schedule, SamplerConfig(method='ddim', steps=4), self.shape, probe=capture)
        self.assertListEqual(sorted(capture.events), [('mid_attn', step) for step in range(4)])
        self.assertIsNotNone(capture.events[('mid_attn', 0)].layout)

    def test_mask_guard(self):
        model = Denoiser(SMALL, seed=0)
        guard = MaskGuard()
        with patch('stencil.diffusion.samplers.settings.CHECK_MASKS', True), \
                patch('stencil.diffusion.samplers.MaskGuard', return_value=guard):
            sample(model, self.conditioning, self.schedule, SamplerConfig(method='ddim', steps=2), self.shape)
        # Five attention layers, one conditional call per step.
        self.assertEqual(guard.checked, 10)
