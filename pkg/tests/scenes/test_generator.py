from unittest import TestCase

import numpy as np

from stencil.evaluation import oracle_segment
from stencil.exceptions import ConfigError, ContractError
from stencil.scenes import ALL_COMBOS, SceneConfig, SceneObject, SceneSpec, caption, gen_scene, render, render_labels


class SceneConfigTests(TestCase):
    def test_invalid(self):
        for kwargs in (
            {'min_objects': 0},
            {'min_objects': 3, 'max_objects': 2},
            {'min_object_size': 2},
            {'max_object_size': 40}
        ):
            with self.subTest(**kwargs), self.assertRaises(ConfigError):
                SceneConfig(**kwargs)


class GeneratorTests(TestCase):
    def test_gen_scene__deterministic(self):
        first = gen_scene(np.random.default_rng(7))
        second = gen_scene(np.random.default_rng(7))
        self.assertEqual(first, second)
        self.assertTrue(1 <= len(first.objects) <= 3)
        for scene_object in first.objects:
            self.assertTrue(8 <= scene_object.size <= 16)
            self.assertLessEqual(scene_object.x + scene_object.size, 32)
            self.assertLessEqual(scene_object.y + scene_object.size, 32)

    def test_gen_scene__restricted_combos(self):
        config = SceneConfig(combos=(('circle', 'red'),))
        rng = np.random.default_rng(0)
        for _ in range(5):
            for scene_object in gen_scene(rng, config).objects:
                self.assertEqual((scene_object.shape, scene_object.color), ('circle', 'red'))

    def test_gen_scene__coverage(self):
        rng = np.random.default_rng(0)
        # Every allowed combo, with and without one held out.
        for combos in (ALL_COMBOS, ALL_COMBOS[1:]):
            config = SceneConfig(combos=combos)
            seen = set()
            for _ in range(10_000):
                seen.update((scene_object.shape, scene_object.color) for scene_object in gen_scene(rng, config).objects)
            self.assertSetEqual(seen, set(combos))

    def test_gen_scene__no_combos(self):
        with self.assertRaises(ContractError):
            gen_scene(np.random.default_rng(0), SceneConfig(combos=()))

    def test_mask__shapes(self):
        square = SceneObject('square', 'red', 2, 2, 8).mask(16)
        self.assertEqual(square.sum(), 64)
        circle = SceneObject('circle', 'red', 2, 2, 8).mask(16)
        self.assertLess(circle.sum(), 64)
        self.assertFalse(circle[2, 2])
        self.assertTrue(circle[6, 6])
        triangle = SceneObject('triangle', 'red', 0, 0, 8).mask(16)
        # Apex at the top, full width at the bottom row.
        self.assertFalse(triangle[0, 0])
        self.assertTrue(triangle[7, 0])
        self.assertTrue(triangle[7, 7])

    def test_render_labels__occlusion(self):
        spec = SceneSpec(16, (
            SceneObject('square', 'red', 0, 0, 8),
            SceneObject('square', 'blue', 4, 4, 8)
        ))
        ids = render_labels(spec).ids
        self.assertEqual(ids[0, 0], 1)
        self.assertEqual(ids[5, 5], 3)
        self.assertEqual(ids[15, 15], 0)

    def test_render__oracle_recovers_labels(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            spec = gen_scene(rng)
            image, label_map = render(spec)
            self.assertEqual(image.shape, (32, 32, 3))
            self.assertTrue(np.all(image >= -1.0) and np.all(image <= 1.0))
            self.assertEqual(oracle_segment(image), label_map)

    def test_caption__pretrain(self):
        spec = SceneSpec(16, (
            SceneObject('circle', 'blue', 0, 0, 8),
            SceneObject('square', 'red', 8, 8, 8),
            SceneObject('circle', 'blue', 8, 0, 8)
        ))
        self.assertEqual(caption(spec), 'blue circle red square')

    def test_caption__pretrain_hidden_object(self):
        spec = SceneSpec(16, (
            SceneObject('square', 'green', 4, 4, 4),
            SceneObject('square', 'red', 0, 0, 16)
        ))
        self.assertEqual(caption(spec), 'red square')

    def test_caption__finetune(self):
        spec = SceneSpec(16, (
            SceneObject('triangle', 'blue', 0, 0, 8),
            SceneObject('square', 'red', 8, 8, 8)
        ))
        self.assertEqual(caption(spec, 'finetune'), 'background red square blue triangle')

    def test_caption__unknown_mode(self):
        with self.assertRaises(ContractError):
            caption(SceneSpec(), 'other')
