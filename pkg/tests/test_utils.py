import unittest

import numpy as np

from driftlab.utils import *


class SpawnSeedsTests(unittest.TestCase):
    def test_independent_streams(self):
        first, second = spawn_seeds(0, 2)
        a = np.random.default_rng(first).random(4)
        b = np.random.default_rng(second).random(4)
        self.assertFalse(np.array_equal(a, b))

    def test_deterministic(self):
        for seed in [0, 12345, np.random.SeedSequence(7)]:
            with self.subTest(seed=seed):
                if isinstance(seed, np.random.SeedSequence):
                    other = np.random.SeedSequence(7)
                else:
                    other = seed
                a = [s.generate_state(2).tolist() for s in spawn_seeds(seed, 3)]
                b = [s.generate_state(2).tolist() for s in spawn_seeds(other, 3)]
                self.assertEqual(a, b)

    def test_prefix_is_stable(self):
        short = [s.generate_state(1)[0] for s in spawn_seeds(3, 2)]
        long = [s.generate_state(1)[0] for s in spawn_seeds(3, 5)]
        self.assertEqual(short, long[:2])


class DrawSeedTests(unittest.TestCase):
    def test_draw(self):
        seed = draw_seed(np.random.default_rng(0))
        self.assertIsInstance(seed, int)
        self.assertGreaterEqual(seed, 0)
        self.assertEqual(seed, draw_seed(np.random.default_rng(0)))
