import math
import unittest

import numpy as np
from scipy.integrate import trapezoid

from driftlab.exceptions import DimensionMismatch, InvalidParameter, ShapeMismatch
from driftlab.targets import *

from .utils import NumericTestCase


class ParticleSetTests(NumericTestCase):
    def test_shape(self):
        particles = ParticleSet(np.zeros((5, 3)))
        self.assertEqual(particles.n, 5)
        self.assertEqual(particles.dim, 3)
        self.assertEqual(len(particles), 5)
        self.assertEqual(repr(particles), "ParticleSet(n=5, dim=3)")

    def test_one_dimensional_input(self):
        self.assertEqual(ParticleSet([1.0, 2.0, 3.0]).points.shape, (3, 1))

    def test_read_only(self):
        particles = ParticleSet(np.zeros((2, 2)))
        with self.assertRaises(ValueError):
            particles.points[0, 0] = 1.0

    def test_copies_input(self):
        array = np.zeros((2, 2))
        particles = ParticleSet(array)
        array[0, 0] = 1.0
        self.assertEqual(particles.points[0, 0], 0.0)

    def test_value_semantics(self):
        self.assertEqual(ParticleSet([[1.0, 2.0]]), ParticleSet([[1.0, 2.0]]))
        self.assertNotEqual(ParticleSet([[1.0, 2.0]]), ParticleSet([[2.0, 1.0]]))
        self.assertEqual(
            hash(ParticleSet([[1.0, 2.0]])), hash(ParticleSet([[1.0, 2.0]]))
        )

    def test_empty(self):
        with self.assertRaises(ShapeMismatch):
            ParticleSet(np.zeros((0, 2)))

    def test_non_finite(self):
        with self.assertRaises(InvalidParameter):
            ParticleSet([[0.0, math.nan]])

    def test_translated(self):
        particles = ParticleSet([[0.0, 0.0], [1.0, 1.0]]).translated([1.0, -1.0])
        self.assertArrayEqual(particles.points, [[1.0, -1.0], [2.0, 0.0]])

    def test_subsample(self):
        particles = ParticleSet(np.arange(20.0).reshape(10, 2))
        subset = particles.subsample(4, seed=0)
        self.assertEqual(subset.n, 4)
        self.assertEqual(subset, particles.subsample(4, seed=0))
        self.assertIs(particles.subsample(10, seed=0), particles)
        with self.assertRaises(InvalidParameter):
            particles.subsample(11, seed=0)


class GaussianMixtureTests(NumericTestCase):
    def test_default_four_mode(self):
        m = GaussianMixture.default_four_mode()
        self.assertEqual(m.n_components, 4)
        self.assertEqual(m.dim, 2)
        self.assertEqual(m.component_std, 0.15)
        self.assertAllClose(m.mean(), [0.0, 0.0], atol=1e-15)

    def test_invalid_weights(self):
        with self.assertRaises(InvalidParameter):
            GaussianMixture([0.5, 0.6], [[0.0], [1.0]], 1.0)

    def test_mismatched_means(self):
        with self.assertRaises(ShapeMismatch):
            GaussianMixture([0.5, 0.5], [[0.0, 0.0]], 1.0)

    def test_invalid_std(self):
        with self.assertRaises(InvalidParameter):
            GaussianMixture([1.0], [[0.0]], 0.0)

    def test_sample(self):
        m = GaussianMixture.default_four_mode()
        samples = sample_gmm(m, 20_000, seed=0)
        self.assertEqual(samples.n, 20_000)
        self.assertAllClose(samples.points.mean(axis=0), [0.0, 0.0], atol=0.03)
        self.assertAllClose(samples.points.var(axis=0), [1.0225, 1.0225], rtol=0.03)

    def test_sample_is_deterministic(self):
        m = GaussianMixture.default_four_mode()
        self.assertEqual(sample_gmm(m, 100, seed=3), sample_gmm(m, 100, seed=3))
        self.assertNotEqual(sample_gmm(m, 100, seed=3), sample_gmm(m, 100, seed=4))

    def test_invalid_count(self):
        with self.assertRaises(InvalidParameter):
            sample_gmm(GaussianMixture.default_four_mode(), 0, seed=0)

    def test_log_density_normalized(self):
        m = GaussianMixture([0.3, 0.7], [[-1.0], [2.0]], 0.5)
        x = np.linspace(-8.0, 10.0, 20_001)
        density = np.exp(gmm_log_density(m, 0.2, x[:, None]))
        self.assertAlmostEqual(trapezoid(density, x), 1.0, places=6)

    def test_smoothed_score_matches_finite_differences(self):
        m = GaussianMixture.default_four_mode()
        x = np.array([[0.3, -0.7], [1.2, 0.9], [-2.0, 0.1]])
        h = 1e-6
        expected = np.empty_like(x)
        for axis in range(2):
            step = np.zeros(2)
            step[axis] = h
            expected[:, axis] = (
                gmm_log_density(m, 0.3, x + step) - gmm_log_density(m, 0.3, x - step)
            ) / (2 * h)
        self.assertAllClose(gmm_smoothed_score(m, 0.3, x), expected, rtol=1e-6)

    def test_smoothed_score_with_equal_means(self):
        mean = [0.4, -0.3]
        m = GaussianMixture([0.2, 0.3, 0.5], [mean] * 3, 0.7)
        g = IsotropicGaussian(mean, 0.7)
        x = np.random.default_rng(0).normal(scale=2.0, size=(50, 2))
        for sigma in [0.0, 0.3, 1.5]:
            with self.subTest(sigma=sigma):
                self.assertAllClose(
                    gmm_smoothed_score(m, sigma, x),
                    gaussian_smoothed_score(g, sigma, x),
                    rtol=1e-12,
                    atol=1e-12,
                )

    def test_smoothed_score_far_away_is_finite(self):
        m = GaussianMixture.default_four_mode()
        self.assertFinite(gmm_smoothed_score(m, 0.0, [1e4, -1e4]))

    def test_smoothed_score_single_point_shape(self):
        m = GaussianMixture.default_four_mode()
        self.assertEqual(gmm_smoothed_score(m, 0.3, [0.0, 0.5]).shape, (2,))

    def test_negative_sigma(self):
        with self.assertRaises(InvalidParameter):
            gmm_log_density(GaussianMixture.default_four_mode(), -0.1, [0.0, 0.0])


class IsotropicGaussianTests(NumericTestCase):
    def test_sample(self):
        g = IsotropicGaussian.standard(2.0, dim=3)
        samples = g.sample(20_000, seed=0)
        self.assertEqual(samples.dim, 3)
        self.assertAllClose(samples.points.std(axis=0), [2.0, 2.0, 2.0], rtol=0.03)

    def test_log_density(self):
        g = IsotropicGaussian.standard(1.0, dim=2)
        self.assertAlmostEqual(
            float(g.log_density([0.0, 0.0])[0]), -math.log(2 * math.pi)
        )

    def test_smoothed_score(self):
        g = IsotropicGaussian([1.0, 0.0], 1.0)
        self.assertAllClose(gaussian_smoothed_score(g, 1.0, [3.0, 2.0]), [-1.0, -1.0])

    def test_invalid_std(self):
        with self.assertRaises(InvalidParameter):
            IsotropicGaussian.standard(0.0)

    def test_dimension_mismatch(self):
        with self.assertRaises(DimensionMismatch):
            IsotropicGaussian.standard(1.0, dim=2).log_density([0.0, 0.0, 0.0])


class CheckerboardTests(NumericTestCase):
    def test_samples_are_on_black_cells(self):
        samples = sample_checkerboard(5000, seed=0)
        self.assertTrue(np.all(in_checkerboard(samples)))

    def test_in_checkerboard(self):
        self.assertArrayEqual(
            in_checkerboard([[0.5, 0.5], [0.5, 1.5], [-1.5, -1.5], [2.5, 2.5]]),
            [True, False, True, False],
        )

    def test_covers_all_black_cells(self):
        samples = sample_checkerboard(5000, seed=0).points
        cells = {tuple(cell) for cell in np.floor(samples).astype(int)}
        self.assertEqual(len(cells), 8)


class SwissRollTests(NumericTestCase):
    def test_radius(self):
        samples = sample_swiss_roll(2000, seed=0, jitter=0.0).points
        radius = np.linalg.norm(samples, axis=1)
        self.assertLessEqual(radius.max(), 2.0 + 1e-12)
        self.assertGreaterEqual(radius.min(), 2.0 / 3.0 - 1e-12)

    def test_invalid_jitter(self):
        with self.assertRaises(InvalidParameter):
            sample_swiss_roll(10, seed=0, jitter=-1.0)


class ProbeGridTests(NumericTestCase):
    def test_grid(self):
        grid = probe_grid(-1.0, 1.0, 3)
        self.assertEqual(grid.n, 9)
        self.assertArrayEqual(grid.points[:3], [[-1.0, -1.0], [-1.0, 0.0], [-1.0, 1.0]])

    def test_one_dimensional(self):
        self.assertEqual(probe_grid(0.0, 1.0, 5, dim=1).points.shape, (5, 1))

    def test_invalid(self):
        with self.assertRaises(InvalidParameter):
            probe_grid(1.0, 1.0, 3)
        with self.assertRaises(InvalidParameter):
            probe_grid(0.0, 1.0, 0)


class TargetRegistryTests(unittest.TestCase):
    def test_get_target(self):
        for name in ["gmm4", "checkerboard", "swiss-roll"]:
            with self.subTest(name=name):
                samples = get_target(name)(64, 0)
                self.assertEqual((samples.n, samples.dim), (64, 2))

    def test_unknown_target(self):
        with self.assertRaises(InvalidParameter) as raised:
            get_target("moons")
        self.assertEqual(
            str(raised.exception),
            "target must be one of checkerboard, gmm4, swiss-roll, got 'moons'",
        )
