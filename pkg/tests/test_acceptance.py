"""
End-to-end checks of the headline results.

These runs take minutes; set DRIFTLAB_SLOW_TESTS=1 to enable them.

"""

import dataclasses
import json
import math
import unittest

from driftlab.config import *
from driftlab.experiments import run
from driftlab.kernels import KernelSpec

from .utils import slow, temp_dir


def summary(kind, section, seed=0):
    with temp_dir() as directory:
        config = ExperimentConfig(kind, section, seed, str(directory))
        return json.loads(run(config).read_text())["summary"]


SMOKE_TRAIN = TrainSection(
    target="checkerboard",
    batch_size=1024,
    steps=5000,
    hidden=128,
    metric_every=500,
    sw_samples=2000,
)


@slow
class AcceptanceTests(unittest.TestCase):
    def test_score_identity(self):
        result = summary(ExperimentKind.VERIFY_SCORE, VerifyScoreSection())
        self.assertLessEqual(result["mean_error"]["0.3"], 2e-2)

    def test_spectral_agreement(self):
        result = summary(ExperimentKind.SPECTRAL, SpectralSection())
        for name in ["gaussian", "laplacian"]:
            with self.subTest(kernel=name):
                self.assertLessEqual(result["relative_time_error"][name], 0.05)
        step = (20 - 0.05) / 399
        self.assertLessEqual(
            abs(result["gaussian_rate_argmax"] - math.sqrt(2) / 0.3), step
        )

    def test_annealing_speedup(self):
        result = summary(ExperimentKind.SCHEDULE_ABLATION, ScheduleAblationSection())
        self.assertGreaterEqual(result["speedup_linear"], 3.0)
        self.assertGreaterEqual(result["speedup_cosine"], 1.0)
        self.assertTrue(result["within_bound"])
        self.assertGreater(result["log_k_r_squared"], 0.9)

    def test_stop_gradient_necessity(self):
        stopgrad = summary(ExperimentKind.TRAIN, SMOKE_TRAIN)["final"]
        coupled = summary(
            ExperimentKind.TRAIN,
            dataclasses.replace(SMOKE_TRAIN, loss_mode="coupled"),
        )["final"]
        self.assertLessEqual(stopgrad["sliced_wasserstein"], 0.1)
        self.assertGreater(
            coupled["sliced_wasserstein"], stopgrad["sliced_wasserstein"]
        )
        self.assertLess(coupled["mean_drift_norm"], stopgrad["mean_drift_norm"])

    def test_landscape(self):
        section = LandscapeSection(
            train=TrainSection(
                target="checkerboard",
                batch_size=512,
                steps=2000,
                hidden=64,
                metric_every=500,
                sw_samples=1024,
                gradient_snapshot_every=20,
            ),
            n_eval=512,
            n_proj=64,
        )
        result = summary(ExperimentKind.LANDSCAPE, section)
        self.assertLessEqual(result["stop_gradient_argmin_sw_quantile"], 0.25)
        self.assertGreater(result["coupled_argmin_sw_quantile"], 0.5)

    def test_sinkhorn_training(self):
        section = TrainSection(
            target="checkerboard",
            kernel=KernelSpec.laplacian(0.05),
            epsilon=0.01,
            batch_size=512,
            steps=3000,
            hidden=128,
            metric_every=500,
            sw_samples=512,
        )
        result = summary(ExperimentKind.SINKHORN_TRAIN, section)
        self.assertLessEqual(result["final"]["sliced_wasserstein"], 0.1)
