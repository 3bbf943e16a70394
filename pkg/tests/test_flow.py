import logging
import unittest

import numpy as np

from driftlab.exceptions import InvalidParameter
from driftlab.flow import *
from driftlab.kernels import BandwidthSchedule, KernelSpec, schedule_sigma
from driftlab.targets import GaussianMixture, IsotropicGaussian, sample_gmm

from .utils import NumericTestCase


class ParticleFlowTests(NumericTestCase):
    def setUp(self):
        self.p = sample_gmm(GaussianMixture.default_four_mode(), 300, seed=0)
        self.initial = IsotropicGaussian.standard(1.0).sample(300, seed=1)

    def test_moves_towards_target(self):
        history = particle_flow(
            self.initial, self.p, KernelSpec.laplacian(0.3), 0.5, 40, n_proj=64
        )
        first, last = history.records[0], history.records[-1]
        self.assertLess(last.sliced_wasserstein, first.sliced_wasserstein)
        self.assertLess(last.mean_drift_norm, first.mean_drift_norm)

    def test_records(self):
        history = particle_flow(
            self.initial,
            self.p,
            KernelSpec.gaussian(0.5),
            0.1,
            25,
            record_every=10,
            n_proj=16,
        )
        self.assertEqual([r.step for r in history.records], [0, 10, 20, 25])
        self.assertEqual([r.time for r in history.records], [0.0, 1.0, 2.0, 2.5])
        self.assertEqual(len(history.snapshots), 4)
        self.assertEqual(history.snapshots[0], self.initial)
        self.assertEqual(history.snapshots[-1], history.final)

    def test_stationary_at_target(self):
        history = particle_flow(self.p, self.p, KernelSpec.laplacian(0.1), 0.5, 5)
        self.assertEqual(history.final, self.p)
        self.assertEqual(history.records[-1].mean_drift_norm, 0.0)

    def test_schedule(self):
        schedule = BandwidthSchedule.exponential(1.0, 0.1, sweep_time=2.0)
        history = particle_flow(
            self.initial,
            self.p,
            KernelSpec.gaussian(1.0),
            0.5,
            6,
            schedule=schedule,
            record_every=2,
            n_proj=16,
        )
        for record in history.records:
            with self.subTest(step=record.step):
                self.assertEqual(
                    record.bandwidth, schedule_sigma(schedule, record.time)
                )

    def test_extra_kernels(self):
        single = particle_flow(
            self.initial, self.p, KernelSpec.laplacian(0.3), 0.2, 1, n_proj=16
        )
        multi = particle_flow(
            self.initial,
            self.p,
            KernelSpec.laplacian(0.3),
            0.2,
            1,
            extra_kernels=(KernelSpec.laplacian(1.0),),
            n_proj=16,
        )
        self.assertFalse(np.array_equal(single.final.points, multi.final.points))

    def test_deterministic(self):
        kernel = KernelSpec.laplacian(0.3)
        first = particle_flow(self.initial, self.p, kernel, 0.5, 3, seed=4)
        second = particle_flow(self.initial, self.p, kernel, 0.5, 3, seed=4)
        self.assertEqual(first.final, second.final)
        self.assertEqual(first.records, second.records)

    def test_logger(self):
        logger = logging.getLogger("tests.flow")
        with self.assertLogs(logger, "INFO") as logs:
            particle_flow(
                self.initial,
                self.p,
                KernelSpec.laplacian(0.3),
                0.5,
                2,
                record_every=1,
                n_proj=8,
                logger=logger,
            )
        self.assertEqual(len(logs.records), 3)

    def test_invalid(self):
        kernel = KernelSpec.laplacian(0.3)
        for kwargs in [
            {"step": 0.0, "n_steps": 5},
            {"step": 0.1, "n_steps": 0},
            {"step": 0.1, "n_steps": 5, "record_every": 0},
        ]:
            with self.subTest(kwargs=kwargs):
                with self.assertRaises(InvalidParameter):
                    particle_flow(self.initial, self.p, kernel, **kwargs)
