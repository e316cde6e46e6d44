import math
from unittest import TestCase
from unittest.mock import Mock

import numpy as np

from stencil.denoiser import Denoiser
from stencil.diffusion import NoiseSchedule, TrainingBatch, cfg_eps, drop_conditioning, q_sample, training_loss
from stencil.exceptions import ContractError, DimensionError, TrainingDivergenceError
from stencil.tensor import Tensor, gradcheck

from ..denoiser.test_unet import SMALL


class TrainingLossTests(TestCase):
    def setUp(self):
        self.schedule = NoiseSchedule(T=50)
        self.rng = np.random.default_rng(0)
        layout = (self.rng.random((2, 6, 8, 8)) < 0.5).astype(float)
        layout[:, 0] = 1.0
        self.batch = TrainingBatch(
            z0=self.rng.uniform(-1.0, 1.0, (2, 3, 8, 8)),
            text=self.rng.standard_normal((2, 6, 8)),
            layout=layout
        )
        self.null_text = np.zeros((6, 8))

    def test_perfect_prediction(self):
        noise = self.rng.standard_normal(self.batch.z0.shape)
        model = Mock(return_value=Tensor(noise))
        loss = training_loss(model, self.batch, self.schedule, self.rng, p_uncond=0.0, t=np.array([3, 4]), noise=noise)
        self.assertEqual(loss.item(), 0.0)

        z_t, t, text = model.call_args.args
        np.testing.assert_array_equal(z_t.data, q_sample(self.schedule, self.batch.z0, [3, 4], noise))
        np.testing.assert_array_equal(t, [3, 4])
        self.assertIs(text, self.batch.text)
        self.assertIs(model.call_args.kwargs['layout'], self.batch.layout)
        self.assertEqual(model.call_args.kwargs['strength'], math.inf)

    def test_always_unconditional(self):
        model = Mock(return_value=Tensor(np.zeros(self.batch.z0.shape)))
        training_loss(model, self.batch, self.schedule, self.rng, p_uncond=1.0, null_text=self.null_text)
        _, _, text = model.call_args.args
        np.testing.assert_array_equal(text, np.zeros((2, 6, 8)))
        np.testing.assert_array_equal(model.call_args.kwargs['layout'], np.ones((2, 6, 8, 8)))

    def test_mse(self):
        noise = np.ones(self.batch.z0.shape)
        model = Mock(return_value=Tensor(np.full(self.batch.z0.shape, 3.0)))
        loss = training_loss(model, self.batch, self.schedule, self.rng, p_uncond=0.0, noise=noise)
        self.assertEqual(loss.item(), 4.0)

    def test_divergence(self):
        model = Mock(return_value=Tensor(np.full(self.batch.z0.shape, np.nan)))
        with self.assertRaises(TrainingDivergenceError):
            training_loss(model, self.batch, self.schedule, self.rng)

    def test_invalid_p_uncond(self):
        with self.assertRaises(ContractError):
            training_loss(Mock(), self.batch, self.schedule, self.rng, p_uncond=1.5)

    def test_drop_conditioning(self):
        dropped = drop_conditioning(self.batch, self.null_text, np.array([False, True]))
        np.testing.assert_array_equal(dropped.text[0], self.batch.text[0])
        np.testing.assert_array_equal(dropped.text[1], self.null_text)
        np.testing.assert_array_equal(dropped.layout[0], self.batch.layout[0])
        self.assertTrue(np.all(dropped.layout[1] == 1.0))
        self.assertIs(drop_conditioning(self.batch, self.null_text, np.array([False, False])), self.batch)

    def test_batch_mismatch(self):
        with self.assertRaises(DimensionError):
            TrainingBatch(np.zeros((2, 3, 8, 8)), np.zeros((3, 6, 8)))

    def test_gradient_matches_finite_differences(self):
        model = Denoiser(SMALL, seed=3)
        t, noise = np.array([7, 30]), self.rng.standard_normal(self.batch.z0.shape)

        def loss():
            return training_loss(model, self.batch, self.schedule, self.rng, p_uncond=0.0, t=t, noise=noise)

        tensors = [
            model.mid_attn.w_k,
            model.down[1].attn[0].w_q,
            model.up[0].attn[0].w_v,
            model.conv_in.weight,
            model.conv_out.weight,
            model.norm_out.gain,
            model.time_embed.fc1.weight
        ]
        # 7 tensors x 4 entries.
        self.assertLess(gradcheck(loss, tensors, coordinates=4, rng=np.random.default_rng(5)), 1e-4)


class CfgEpsTests(TestCase):
    def test_cfg_eps(self):
        cond, uncond = np.array([2.0, 4.0]), np.array([1.0, 1.0])
        np.testing.assert_array_equal(cfg_eps(cond, uncond, 1.0), cond)
        np.testing.assert_array_equal(cfg_eps(cond, uncond, 0.0), uncond)
        np.testing.assert_array_equal(cfg_eps(cond, uncond, 2.0), [3.0, 7.0])
        with self.assertRaises(DimensionError):
            cfg_eps(cond, np.zeros(3), 2.0)
