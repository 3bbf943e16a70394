import unittest

import numpy as np

from driftlab.exceptions import InsufficientData, InvalidParameter
from driftlab.generator import MlpGenerator, mlp_forward
from driftlab.kernels import KernelSpec
from driftlab.landscape import *

from .utils import NumericTestCase


class PrincipalDirectionsTests(NumericTestCase):
    def test_orthonormal(self):
        snapshots = list(np.random.default_rng(0).standard_normal((10, 30)))
        directions = principal_directions(snapshots)
        self.assertFalse(directions.degenerate)
        self.assertAlmostEqual(np.linalg.norm(directions.first), 1.0)
        self.assertAlmostEqual(np.linalg.norm(directions.second), 1.0)
        self.assertAlmostEqual(directions.first @ directions.second, 0.0)
        first, second = directions.explained
        self.assertGreaterEqual(first, second)
        self.assertLessEqual(first + second, 1.0 + 1e-12)

    def test_recovers_dominant_direction(self):
        rng = np.random.default_rng(1)
        axis = np.zeros(20)
        axis[3] = 1.0
        snapshots = [
            10.0 * rng.standard_normal() * axis + 0.01 * rng.standard_normal(20)
            for _ in range(50)
        ]
        directions = principal_directions(snapshots)
        self.assertAlmostEqual(abs(directions.first[3]), 1.0, places=3)
        self.assertGreater(directions.explained[0], 0.99)

    def test_rank_one(self):
        axis = np.arange(1.0, 7.0)
        snapshots = [scale * axis for scale in [1.0, 2.0, 4.0]]
        with self.assertLogs("driftlab.landscape", "WARNING"):
            directions = principal_directions(snapshots, seed=0)
        self.assertTrue(directions.degenerate)
        self.assertAlmostEqual(abs(directions.first @ axis), np.linalg.norm(axis))
        self.assertAlmostEqual(directions.first @ directions.second, 0.0)
        self.assertAlmostEqual(directions.explained[1], 0.0)

    def test_insufficient(self):
        with self.assertRaises(InsufficientData):
            principal_directions([np.ones(4)])


class LandscapeScanTests(NumericTestCase):
    def setUp(self):
        rng = np.random.default_rng(0)
        self.generator = MlpGenerator.init(2, 4, 2, seed=0)
        self.snapshots = list(
            rng.standard_normal((6, self.generator.n_parameters))
        )
        self.noise = rng.standard_normal((40, 2))
        self.data = rng.standard_normal((40, 2))
        self.kernels = [KernelSpec.gaussian(1.0)]

    def scan(self, **kwargs):
        return landscape_scan(
            self.generator,
            self.snapshots,
            self.noise,
            self.data,
            self.data,
            self.kernels,
            n_proj=16,
            **kwargs,
        )

    def test_grid(self):
        scan = self.scan(grid_n=5, grid_half_width=0.5)
        self.assertEqual(scan.loss.shape, (5, 5))
        self.assertEqual(scan.sliced_wasserstein.shape, (5, 5))
        self.assertAllClose(scan.alphas, [-0.5, -0.25, 0.0, 0.25, 0.5])
        self.assertEqual(len(scan.rows()), 25)
        self.assertTrue(np.all(scan.loss >= 0))

    def test_center_is_trained_generator(self):
        scan = self.scan(grid_n=5)
        i, j = scan.center
        expected = landscape_loss(self.generator, self.noise, self.data, self.kernels)
        self.assertAlmostEqual(scan.loss[i, j], expected)

    def test_to_json(self):
        summary = self.scan(grid_n=3).to_json()
        self.assertEqual(summary["grid_n"], 3)
        self.assertEqual(summary["half_width"], 1.0)
        self.assertLessEqual(
            summary["loss_at_argmin"], float(np.max(self.scan(grid_n=3).loss))
        )

    def test_deterministic(self):
        first = self.scan(grid_n=3, seed=5)
        second = self.scan(grid_n=3, seed=5)
        self.assertArrayEqual(first.sliced_wasserstein, second.sliced_wasserstein)

    def test_invalid(self):
        for kwargs in [{"grid_n": 1}, {"grid_half_width": 0.0}]:
            with self.subTest(**kwargs):
                with self.assertRaises(InvalidParameter):
                    self.scan(**kwargs)

    def test_wrong_snapshot_size(self):
        self.snapshots = [np.ones(5), np.arange(5.0)]
        with self.assertRaises(InvalidParameter):
            self.scan(grid_n=3)


class LandscapeLossTests(NumericTestCase):
    def test_zero_when_data_is_generated(self):
        generator = MlpGenerator.init(2, 4, 2, seed=0)
        noise = np.random.default_rng(0).standard_normal((10, 2))
        data = mlp_forward(generator, noise)
        loss = landscape_loss(generator, noise, data, [KernelSpec.gaussian(1.0)])
        self.assertEqual(loss, 0.0)
