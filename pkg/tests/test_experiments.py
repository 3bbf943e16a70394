import json
import math
import unittest

from driftlab.config import *
from driftlab.experiments import *
from driftlab.kernels import KernelSpec

from .utils import temp_dir


TINY_TRAIN = TrainSection(
    target="gmm4",
    kernel=KernelSpec.gaussian(0.5),
    epsilon=0.5,
    batch_size=32,
    steps=4,
    hidden=8,
    metric_every=2,
    sw_samples=64,
    sw_projections=8,
    snapshot_every=2,
)

TINY_SECTIONS = {
    ExperimentKind.VERIFY_SCORE: VerifyScoreSection(
        sigmas=(0.5, 1.0), n_samples=1000, n_probes=10, grid_n=3
    ),
    ExperimentKind.SPECTRAL: SpectralSection(k_max=3, t_max=500.0, curve_horizon=5.0),
    ExperimentKind.SCHEDULE_ABLATION: ScheduleAblationSection(
        k_max=3, t_max=2000.0, curve_step=10.0
    ),
    ExperimentKind.TRAIN: TINY_TRAIN,
    ExperimentKind.SINKHORN_TRAIN: TINY_TRAIN,
    ExperimentKind.LANDSCAPE: LandscapeSection(
        train=TrainSection(
            target="gmm4",
            kernel=KernelSpec.gaussian(0.5),
            batch_size=32,
            steps=4,
            hidden=8,
            metric_every=2,
            sw_samples=64,
            sw_projections=8,
            gradient_snapshot_every=1,
        ),
        loss_modes=("stop-gradient", "coupled"),
        grid_n=3,
        n_eval=32,
        n_proj=8,
    ),
    ExperimentKind.PARTICLE_FLOW: ParticleFlowSection(
        target="gmm4",
        n_particles=100,
        kernel=KernelSpec.gaussian(0.5),
        n_steps=4,
        record_every=2,
        n_proj=8,
        snapshot_every=2,
    ),
}

EXPECTED_OUTPUTS = {
    ExperimentKind.VERIFY_SCORE: [
        "score_errors.csv",
        "score_report.json",
        "drift_field_sigma_0.5.csv",
        "analytic_field_sigma_1.csv",
    ],
    ExperimentKind.SPECTRAL: [
        "decay_times_gaussian.csv",
        "decay_times_laplacian.csv",
        "total_error_laplacian.csv",
        "decay_rates.csv",
    ],
    ExperimentKind.SCHEDULE_ABLATION: [
        "ablation_times.csv",
        "ablation_curve_cosine.csv",
        "bandwidth_schedules.csv",
    ],
    ExperimentKind.TRAIN: [
        "history.csv",
        "particles_step_2.csv",
        "particles_final.csv",
        "target_samples.csv",
        "checkpoints/final.bin",
    ],
    ExperimentKind.SINKHORN_TRAIN: ["history.csv", "particles_final.csv"],
    ExperimentKind.LANDSCAPE: [
        "stop_gradient_landscape.csv",
        "coupled_landscape.json",
        "coupled_history.csv",
    ],
    ExperimentKind.PARTICLE_FLOW: [
        "flow_history.csv",
        "flow_particles_step_2.csv",
        "flow_particles_final.csv",
    ],
}


def tiny_config(kind, directory, seed=0):
    return ExperimentConfig(kind, TINY_SECTIONS[kind], seed, str(directory))


class RunTests(unittest.TestCase):
    def test_every_experiment(self):
        for kind in ExperimentKind:
            with self.subTest(kind=kind.value):
                with temp_dir() as directory:
                    manifest_path = run(tiny_config(kind, directory))
                    self.assertEqual(manifest_path, directory / "manifest.json")
                    manifest = json.loads(manifest_path.read_text())
                    for name in manifest["outputs"]:
                        self.assertTrue((directory / name).exists(), name)
                    for name in EXPECTED_OUTPUTS[kind]:
                        self.assertIn(name, manifest["outputs"])
                    self.assertEqual(manifest["config"]["experiment"], kind.value)
                    self.assertIn("numpy", manifest["versions"])

    def test_metrics(self):
        with temp_dir() as directory:
            run(tiny_config(ExperimentKind.PARTICLE_FLOW, directory))
            lines = (directory / "metrics.jsonl").read_text().splitlines()
        reports = [json.loads(line) for line in lines]
        self.assertEqual([report["step"] for report in reports], [0, 2, 4])
        self.assertEqual({report["name"] for report in reports}, {"sliced_wasserstein"})

    def test_reproducible(self):
        for kind in [ExperimentKind.TRAIN, ExperimentKind.VERIFY_SCORE]:
            with self.subTest(kind=kind.value):
                with temp_dir() as first, temp_dir() as second:
                    run(tiny_config(kind, first, seed=3))
                    run(tiny_config(kind, second, seed=3))
                    manifest = json.loads((first / "manifest.json").read_text())
                    for name in manifest["outputs"]:
                        self.assertEqual(
                            (first / name).read_bytes(),
                            (second / name).read_bytes(),
                            name,
                        )

    def test_seed_matters(self):
        with temp_dir() as first, temp_dir() as second:
            run(tiny_config(ExperimentKind.TRAIN, first, seed=1))
            run(tiny_config(ExperimentKind.TRAIN, second, seed=2))
            self.assertNotEqual(
                (first / "history.csv").read_bytes(),
                (second / "history.csv").read_bytes(),
            )

    def test_summary(self):
        with temp_dir() as directory:
            manifest_path = run(tiny_config(ExperimentKind.SPECTRAL, directory))
            summary = json.loads(manifest_path.read_text())["summary"]
        self.assertAlmostEqual(summary["gaussian_cutoff"], math.sqrt(2) / 0.3)
        self.assertIn("relative_time_error", summary)

    def test_logs(self):
        with temp_dir() as directory:
            with self.assertLogs("driftlab.experiments", "INFO") as logs:
                run(tiny_config(ExperimentKind.PARTICLE_FLOW, directory))
        self.assertIn("running particle-flow with seed 0", logs.output[0])
