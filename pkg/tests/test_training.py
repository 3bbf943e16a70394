import math
import unittest
import unittest.mock

import numpy as np

from driftlab.artifacts import load_checkpoint
from driftlab.exceptions import (
    InvalidParameter,
    NonFiniteLoss,
    ShapeMismatch,
    UnsupportedBackend,
)
from driftlab.generator import MlpGenerator, mlp_forward
from driftlab.kernels import BandwidthSchedule, KernelSpec
from driftlab.metrics import mean_drift_norm
from driftlab.targets import get_target
from driftlab.training import *

from .test_generator import numeric_gradient
from .utils import NumericTestCase, temp_dir


def small_config(**kwargs):
    settings = dict(
        kernel=KernelSpec.gaussian(0.5),
        batch_size=64,
        steps=20,
        hidden=16,
        metric_every=10,
        sw_samples=200,
        sw_projections=16,
    )
    settings.update(kwargs)
    return TrainConfig(**settings)


class TrainConfigTests(unittest.TestCase):
    def test_defaults(self):
        config = TrainConfig()
        self.assertIs(config.loss_mode, STOP_GRADIENT)
        self.assertIs(config.backend, KERNEL)
        self.assertEqual(config.batch_size, 2048)
        self.assertEqual(config.noise_dim, 2)

    def test_coupled_sinkhorn_unsupported(self):
        with self.assertRaises(UnsupportedBackend):
            TrainConfig(loss_mode=COUPLED, backend=SINKHORN)

    def test_invalid(self):
        for kwargs in [
            {"eta": 0.0},
            {"lr": -1.0},
            {"epsilon": math.inf},
            {"batch_size": 0},
            {"steps": 0},
            {"checkpoint_every": -1},
            {"extra_kernels": (KernelSpec.gaussian(1.0, dim=3),)},
        ]:
            with self.subTest(**kwargs):
                with self.assertRaises(InvalidParameter):
                    TrainConfig(**kwargs)

    def test_kernels_at(self):
        config = TrainConfig(
            kernel=KernelSpec.gaussian(1.0),
            extra_kernels=(KernelSpec.laplacian(0.2),),
            schedule=BandwidthSchedule.linear(2.0, 0.5, horizon=100.0),
        )
        kernels = config.kernels_at(50)
        self.assertEqual(len(kernels), 2)
        self.assertAlmostEqual(kernels[0].bandwidth, 1.0)
        self.assertEqual(kernels[1], KernelSpec.laplacian(0.2))
        self.assertAlmostEqual(config.kernels_at(200)[0].bandwidth, 0.5)

    def test_names(self):
        self.assertEqual(str(STOP_GRADIENT), "stop-gradient")
        self.assertEqual(str(COUPLED), "coupled")
        self.assertEqual(str(SINKHORN), "sinkhorn")


class TrainHistoryTests(unittest.TestCase):
    def test_append_in_order(self):
        history = TrainHistory()
        history.append(TrainRecord(10, 1.0, 0.5, 0.2, 0.1))
        history.append(TrainRecord(20, 0.5, 0.4, 0.1, 0.1))
        self.assertEqual(len(history), 2)
        self.assertEqual(history.final.step, 20)
        self.assertEqual(list(history.column("step")), [10, 20])
        self.assertEqual(history.rows()[0], (10, 1.0, 0.5, 0.2, 0.1))

    def test_append_out_of_order(self):
        history = TrainHistory()
        history.append(TrainRecord(10, 1.0, 0.5, 0.2, 0.1))
        with self.assertRaises(InvalidParameter):
            history.append(TrainRecord(10, 1.0, 0.5, 0.2, 0.1))


class LossTests(NumericTestCase):
    def setUp(self):
        rng = np.random.default_rng(0)
        self.generator = MlpGenerator.init(2, 8, 2, seed=1)
        self.z = rng.standard_normal((6, 2))
        self.p = rng.standard_normal((5, 2))

    def test_drift_targets_vanish_at_equilibrium(self):
        x = np.random.default_rng(2).standard_normal((10, 2))
        targets = drift_targets(x, x, [KernelSpec.gaussian(1.0)], eta=0.5)
        self.assertAllClose(targets, x, atol=1e-12)

    def test_stopgrad_gradient(self):
        targets = np.random.default_rng(3).standard_normal((6, 2))
        loss, grads = stopgrad_loss_and_grad(self.generator, self.z, targets)

        def value(generator):
            residual = mlp_forward(generator, self.z) - targets
            return float(np.sum(residual**2) / len(residual))

        self.assertAlmostEqual(loss, value(self.generator))
        self.assertAllClose(
            grads.flatten(),
            numeric_gradient(value, self.generator),
            rtol=1e-5,
            atol=1e-8,
        )

    def test_stopgrad_zero_at_targets(self):
        targets = mlp_forward(self.generator, self.z)
        loss, grads = stopgrad_loss_and_grad(self.generator, self.z, targets)
        self.assertEqual(loss, 0.0)
        self.assertArrayEqual(grads.flatten(), np.zeros(self.generator.n_parameters))

    def test_stopgrad_shape_mismatch(self):
        with self.assertRaises(ShapeMismatch):
            stopgrad_loss_and_grad(self.generator, self.z, np.zeros((5, 2)))

    def test_coupled_gradient(self):
        for kernels in [
            [KernelSpec.gaussian(1.0)],
            [KernelSpec.laplacian(1.0)],
            [KernelSpec.gaussian(0.8), KernelSpec.laplacian(1.5)],
        ]:
            with self.subTest(kernels=[str(spec) for spec in kernels]):
                loss, grads = coupled_loss_and_grad(
                    self.generator, self.z, self.p, kernels, eta=0.7
                )

                def value(generator):
                    return coupled_loss_and_grad(
                        generator, self.z, self.p, kernels, eta=0.7
                    )[0]

                self.assertGreater(loss, 0.0)
                self.assertAllClose(
                    grads.flatten(),
                    numeric_gradient(value, self.generator),
                    rtol=1e-4,
                    atol=1e-8,
                )

    def test_coupled_zero_when_generated_equals_data(self):
        x = mlp_forward(self.generator, self.z)
        loss, grads = coupled_loss_and_grad(
            self.generator, self.z, x, [KernelSpec.gaussian(1.0)]
        )
        self.assertAlmostEqual(loss, 0.0, places=20)
        self.assertAllClose(
            grads.flatten(), np.zeros(self.generator.n_parameters), atol=1e-12
        )

    def test_coupled_needs_kernels(self):
        with self.assertRaises(InvalidParameter):
            coupled_loss_and_grad(self.generator, self.z, self.p, [])


class TrainTests(NumericTestCase):
    target = staticmethod(get_target("gmm4"))

    def test_records(self):
        result = train(small_config(), self.target, seed=0)
        self.assertEqual(list(result.history.column("step")), [10, 20])
        self.assertEqual(result.generator.dims, (2, 16, 2))
        self.assertEqual(len(result.gradient_snapshots), 0)
        for record in result.history.records:
            with self.subTest(step=record.step):
                self.assertTrue(math.isfinite(record.loss))
                self.assertGreaterEqual(record.sliced_wasserstein, 0.0)
                self.assertEqual(record.bandwidth, 0.5)

    def test_final_step_is_recorded(self):
        result = train(small_config(steps=15), self.target, seed=0)
        self.assertEqual(list(result.history.column("step")), [10, 15])

    def test_drift_norm_on_evaluation_points(self):
        config = small_config(extra_kernels=(KernelSpec.gaussian(1.5),))
        result = train(config, self.target, seed=0)
        generated = mlp_forward(result.generator, result.eval_noise)
        expected = mean_drift_norm(
            generated[:64], result.eval_targets.points[:64], config.kernels_at(20)
        )
        self.assertEqual(result.history.final.mean_drift_norm, expected)

    def test_deterministic(self):
        first = train(small_config(), self.target, seed=4)
        second = train(small_config(), self.target, seed=4)
        self.assertArrayEqual(first.generator.flatten(), second.generator.flatten())
        self.assertEqual(first.history.rows(), second.history.rows())

    def test_gradient_snapshots(self):
        result = train(
            small_config(gradient_snapshot_every=5), self.target, seed=0
        )
        self.assertEqual(len(result.gradient_snapshots), 4)
        self.assertEqual(
            result.gradient_snapshots[0].shape, (result.generator.n_parameters,)
        )

    def test_coupled(self):
        result = train(
            small_config(loss_mode=COUPLED, batch_size=32, steps=4, metric_every=2),
            self.target,
            seed=0,
        )
        self.assertEqual(len(result.history), 2)

    def test_sinkhorn(self):
        result = train(
            small_config(
                backend=SINKHORN, epsilon=0.5, batch_size=32, steps=2, sw_samples=32
            ),
            self.target,
            seed=0,
        )
        self.assertEqual(result.history.final.bandwidth, 0.5)

    def test_on_record(self):
        seen = []
        train(
            small_config(),
            self.target,
            seed=0,
            on_record=lambda record, generator: seen.append(
                (record.step, generator.dims)
            ),
        )
        self.assertEqual(seen, [(10, (2, 16, 2)), (20, (2, 16, 2))])

    def test_logs_progress(self):
        with self.assertLogs("driftlab.training", "INFO") as logs:
            train(small_config(), self.target, seed=0)
        self.assertEqual(len(logs.records), 2)

    def test_checkpoints(self):
        with temp_dir() as directory:
            result = train(
                small_config(checkpoint_every=10),
                self.target,
                seed=0,
                checkpoint_dir=directory,
            )
            self.assertTrue((directory / "step-10.bin").exists())
            generator, header = load_checkpoint(directory / "final.bin")
        self.assertEqual(header["step"], 20)
        self.assertEqual(header["seed"], 0)
        self.assertArrayEqual(generator.flatten(), result.generator.flatten())

    def test_dimension_mismatch(self):
        with self.assertRaises(InvalidParameter):
            train(small_config(kernel=KernelSpec.gaussian(0.5, dim=3)), self.target)

    def test_non_finite_loss(self):
        def broken(g, z, targets):
            return math.nan, MlpGenerator.zeros(*g.dims)

        with temp_dir() as directory:
            with unittest.mock.patch(
                "driftlab.training.stopgrad_loss_and_grad", broken
            ):
                with self.assertLogs("driftlab.training", "ERROR"):
                    with self.assertRaises(NonFiniteLoss) as raised:
                        train(small_config(), self.target, checkpoint_dir=directory)
            self.assertEqual(raised.exception.step, 1)
            snapshot = raised.exception.snapshot
            self.assertEqual(snapshot, str(directory / "nonfinite-step-1.bin"))
            _, header = load_checkpoint(snapshot)
        self.assertEqual(header["step"], 0)
        self.assertEqual(header["seed"], 0)
