"""
Training generators with drift targets.

Each step samples a noise batch, maps it through the generator, evaluates
the drift ``V`` at the generated batch, and updates the generator with Adam.
Two losses are available:

* With :data:`STOP_GRADIENT`, the drifted points ``x + ηV(x)`` are computed
  first and treated as constant regression targets. The gradient only flows
  through the generator output.
* With :data:`COUPLED`, the loss ``η² mean |V(x)|²`` is differentiated
  through the drift itself, including its dependence on every generated
  point acting as a repelling sample. This loss has spurious minima where
  the drift vanishes although the generated distribution is wrong.

"""

from __future__ import annotations

import dataclasses
import enum
import logging
import math
import pathlib
from collections.abc import Sequence
from typing import Any, Callable

import numpy as np

from .artifacts import save_checkpoint
from .drift import drift_field, mean_shift_weights, multiscale_drift_field
from .exceptions import (
    InvalidParameter,
    NonFiniteLoss,
    ShapeMismatch,
    UnsupportedBackend,
)
from .generator import (
    AdamState,
    MlpGenerator,
    adam_step,
    mlp_backward,
    mlp_forward,
    mlp_forward_cache,
)
from .kernels import GAUSSIAN, BandwidthSchedule, KernelSpec, schedule_sigma
from .metrics import mean_drift_norm, projection_directions, sliced_wasserstein
from .targets import ParticleSet, Sampler, as_points
from .transport import sinkhorn_drift
from .typing import Array, LoggerLike, Seed
from .utils import draw_seed, spawn_seeds
from .workers import chunk_bounds, map_chunks


__all__ = [
    "LossMode",
    "STOP_GRADIENT",
    "COUPLED",
    "DriftBackend",
    "KERNEL",
    "SINKHORN",
    "TrainConfig",
    "TrainRecord",
    "TrainHistory",
    "TrainResult",
    "drift_targets",
    "stopgrad_loss_and_grad",
    "coupled_loss_and_grad",
    "train",
]


class LossMode(enum.Enum):
    """Loss used to turn drifts into parameter updates."""

    STOP_GRADIENT, COUPLED = range(2)

    def __str__(self) -> str:
        return self.name.lower().replace("_", "-")


STOP_GRADIENT = LossMode.STOP_GRADIENT
COUPLED = LossMode.COUPLED


class DriftBackend(enum.Enum):
    """Drift evaluated at generated points."""

    KERNEL, SINKHORN = range(2)

    def __str__(self) -> str:
        return self.name.lower()


KERNEL = DriftBackend.KERNEL
SINKHORN = DriftBackend.SINKHORN


@dataclasses.dataclass(frozen=True)
class TrainConfig:
    """
    Hyperparameters of a training run.

    Attributes:
        loss_mode: :data:`STOP_GRADIENT` or :data:`COUPLED`.
        backend: :data:`KERNEL` or :data:`SINKHORN`.
        kernel: Kernel of the drift with the kernel backend.
        extra_kernels: Additional kernels; the drift is the sum over all
            kernels.
        schedule: Bandwidth schedule, evaluated at the step index, replacing
            the bandwidth of ``kernel``.
        eta: Step scale of the drift.
        epsilon: Entropic regularization with the Sinkhorn backend.
        sinkhorn_max_iter: Iteration cap of each Sinkhorn plan.
        batch_size: Number of generated points and of data points per step.
        steps: Number of optimizer steps.
        lr: Adam learning rate.
        hidden: Width of the hidden layers.
        noise_dim: Dimension of the noise.
        metric_every: Record metrics every this many steps.
        sw_samples: Number of samples per side for the sliced Wasserstein
            distance.
        sw_projections: Number of projections.
        gradient_snapshot_every: Keep the flattened gradient every this many
            steps; 0 keeps none.
        checkpoint_every: Write a checkpoint every this many steps when a
            checkpoint directory is given; 0 writes only the final one.

    """

    loss_mode: LossMode = STOP_GRADIENT
    backend: DriftBackend = KERNEL
    kernel: KernelSpec = KernelSpec.laplacian(0.05)
    extra_kernels: tuple[KernelSpec, ...] = ()
    schedule: BandwidthSchedule | None = None
    eta: float = 1.0
    epsilon: float = 0.01
    sinkhorn_max_iter: int = 500
    batch_size: int = 2048
    steps: int = 50_000
    lr: float = 1e-3
    hidden: int = 256
    noise_dim: int = 2
    metric_every: int = 500
    sw_samples: int = 5000
    sw_projections: int = 200
    gradient_snapshot_every: int = 0
    checkpoint_every: int = 0

    def __post_init__(self) -> None:
        if self.loss_mode is COUPLED and self.backend is SINKHORN:
            raise UnsupportedBackend(str(self.loss_mode), str(self.backend))
        for name in ["eta", "epsilon", "lr"]:
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise InvalidParameter(name, value, "must be positive")
        for name in [
            "sinkhorn_max_iter",
            "batch_size",
            "steps",
            "hidden",
            "noise_dim",
            "metric_every",
            "sw_samples",
            "sw_projections",
        ]:
            value = getattr(self, name)
            if value < 1:
                raise InvalidParameter(name, value, "must be at least 1")
        for name in ["gradient_snapshot_every", "checkpoint_every"]:
            value = getattr(self, name)
            if value < 0:
                raise InvalidParameter(name, value, "must be nonnegative")
        for spec in self.extra_kernels:
            if spec.dim != self.kernel.dim:
                raise InvalidParameter(
                    "extra_kernels", spec, f"must have dimension {self.kernel.dim}"
                )

    def kernels_at(self, step: int) -> tuple[KernelSpec, ...]:
        """Kernels of the drift at a given step."""
        kernel = self.kernel
        if self.schedule is not None:
            kernel = kernel.with_bandwidth(schedule_sigma(self.schedule, float(step)))
        return (kernel,) + self.extra_kernels


@dataclasses.dataclass(frozen=True)
class TrainRecord:
    """
    Metrics recorded during training.

    Attributes:
        step: Number of optimizer steps taken.
        loss: Loss of the last step.
        mean_drift_norm: Mean drift norm at generated evaluation points.
        sliced_wasserstein: Distance between generated and target samples.
        bandwidth: Bandwidth of the main kernel, or ε with Sinkhorn.

    """

    step: int
    loss: float
    mean_drift_norm: float
    sliced_wasserstein: float
    bandwidth: float


@dataclasses.dataclass
class TrainHistory:
    """
    Records of a training run, in step order.

    """

    records: list[TrainRecord] = dataclasses.field(default_factory=list)

    columns = ("step", "loss", "mean_drift_norm", "sliced_wasserstein", "bandwidth")

    def append(self, record: TrainRecord) -> None:
        if self.records and record.step <= self.records[-1].step:
            raise InvalidParameter(
                "step", record.step, f"must exceed {self.records[-1].step}"
            )
        self.records.append(record)

    def column(self, name: str) -> Array:
        return np.array([getattr(record, name) for record in self.records], float)

    def rows(self) -> list[tuple[Any, ...]]:
        return [dataclasses.astuple(record) for record in self.records]

    @property
    def final(self) -> TrainRecord:
        return self.records[-1]

    def __len__(self) -> int:
        return len(self.records)


@dataclasses.dataclass(frozen=True, eq=False)
class TrainResult:
    """
    Outcome of :func:`train`.

    Attributes:
        config: Configuration of the run.
        history: Recorded metrics.
        generator: Final generator.
        gradient_snapshots: Flattened gradients kept during training, in
            step order.
        eval_noise: Fixed noise used for metrics.
        eval_targets: Fixed target samples used for metrics.

    """

    config: TrainConfig
    history: TrainHistory
    generator: MlpGenerator
    gradient_snapshots: list[Array]
    eval_noise: Array
    eval_targets: ParticleSet


def _kernel_drift(x: Array, p_samples: Array, kernels: Sequence[KernelSpec]) -> Array:
    if len(kernels) == 1:
        return drift_field(x, p_samples, x, kernels[0]).vectors
    return multiscale_drift_field(x, p_samples, x, kernels).vectors


def drift_targets(
    x: Array,
    p_samples: Array,
    kernels: Sequence[KernelSpec],
    eta: float = 1.0,
) -> Array:
    """
    Drifted points ``x + ηV(x)``, with ``x`` itself as the generated samples.

    """
    return x + eta * _kernel_drift(x, p_samples, kernels)


def stopgrad_loss_and_grad(
    g: MlpGenerator,
    z: Array,
    targets: Array,
) -> tuple[float, MlpGenerator]:
    """
    Mean squared distance between outputs and constant targets.

    The loss is ``mean_i |f(z_i) - t_i|²``. Targets are plain data; nothing
    flows back through them.

    Raises:
        ShapeMismatch: If ``targets`` doesn't have the shape of the outputs.

    """
    cache = mlp_forward_cache(g, z)
    targets = np.asarray(targets, dtype=np.float64)
    if targets.shape != cache.output.shape:
        raise ShapeMismatch("targets", cache.output.shape, targets.shape)
    residual = cache.output - targets
    n = len(residual)
    loss = float(np.sum(residual**2) / n)
    return loss, mlp_backward(g, cache, 2.0 * residual / n)


def _log_kernel_slope(spec: KernelSpec, diff: Array) -> Array:
    """
    Factor ``c`` such that ``∇_x log k(x, y) = -c (x - y)``.

    The Laplacian kernel isn't differentiable at ``x = y``; ``c`` is 0 there.

    """
    if spec.family is GAUSSIAN:
        return np.full(diff.shape[:2], 1.0 / spec.bandwidth**2)
    distance = np.sqrt(np.sum(diff**2, axis=-1))
    with np.errstate(divide="ignore"):
        return np.where(distance > 0, 1.0 / (spec.bandwidth * distance), 0.0)


def _mean_shift_vjp(
    spec: KernelSpec,
    x: Array,
    samples: Array,
    grad: Array,
) -> tuple[Array, Array]:
    """
    Pull ``grad``, the derivative of a loss with respect to the weighted
    means ``m(x_i) = Σ_j s_ij y_j``, back to ``x`` and to the samples ``y``.

    Weights ``s_ij`` are a softmax of ``log k(x_i, y_j)``, so::

        d m(x_i) = Σ_j s_ij (y_j - m(x_i)) d log k(x_i, y_j) + Σ_j s_ij d y_j

    Rows far from the samples use one-hot weights with zero derivative,
    matching the forward evaluation.

    """

    def evaluate(start: int, stop: int) -> tuple[Array, Array]:
        chunk = x[start:stop]
        chunk_grad = grad[start:stop]
        weights, _ = mean_shift_weights(spec, chunk, samples)
        means = weights @ samples
        a = weights * (
            chunk_grad @ samples.T
            - np.sum(chunk_grad * means, axis=1, keepdims=True)
        )
        diff = chunk[:, None, :] - samples[None, :, :]
        b = a * _log_kernel_slope(spec, diff)
        grad_x = b @ samples - b.sum(axis=1, keepdims=True) * chunk
        grad_y = (
            weights.T @ chunk_grad
            + b.T @ chunk
            - b.sum(axis=0)[:, None] * samples
        )
        return grad_x, grad_y

    bounds = chunk_bounds(len(x), 2 * len(samples) * x.shape[1])
    results = map_chunks(evaluate, bounds)
    grad_x = np.concatenate([grad_x for grad_x, _ in results])
    grad_y = np.sum([grad_y for _, grad_y in results], axis=0)
    return grad_x, grad_y


def coupled_loss_and_grad(
    g: MlpGenerator,
    z: Array,
    p_samples: ParticleSet | Array,
    kernels: Sequence[KernelSpec],
    eta: float = 1.0,
) -> tuple[float, MlpGenerator]:
    """
    Loss ``η² mean_i |V(x_i)|²`` differentiated through the drift.

    Generated points ``x = f(z)`` are both the probes and the repelling
    samples of ``V``, so the gradient collects three paths: the probe
    position in the attraction term, the probe position in the repulsion
    term, and every generated point acting as a repelling sample.

    """
    if len(kernels) == 0:
        raise InvalidParameter("kernels", [], "must not be empty")
    cache = mlp_forward_cache(g, z)
    x = cache.output
    y_p = as_points(p_samples, x.shape[1])
    drift = _kernel_drift(x, y_p, kernels)
    n = len(x)
    loss = float(eta**2 * np.sum(drift**2) / n)
    grad_drift = 2.0 * eta**2 * drift / n
    # V = m_p(x) - m_q(x); the -x terms of both mean shifts cancel.
    grad_x = np.zeros_like(x)
    for spec in kernels:
        attraction_x, _ = _mean_shift_vjp(spec, x, y_p, grad_drift)
        repulsion_x, repulsion_y = _mean_shift_vjp(spec, x, x, -grad_drift)
        grad_x += attraction_x + repulsion_x + repulsion_y
    return loss, mlp_backward(g, cache, grad_x)


def _sample_noise(rng: np.random.Generator, n: int, dim: int) -> Array:
    return rng.standard_normal((n, dim))


def _checkpoint_path(directory: pathlib.Path, name: str) -> pathlib.Path:
    directory.mkdir(parents=True, exist_ok=True)
    return directory / name


def train(
    config: TrainConfig,
    target: Sampler,
    seed: Seed = 0,
    *,
    logger: LoggerLike | None = None,
    on_record: Callable[[TrainRecord, MlpGenerator], None] | None = None,
    checkpoint_dir: str | pathlib.Path | None = None,
) -> TrainResult:
    """
    Train a generator toward samples of ``target``.

    Every step draws a fresh noise batch and a fresh batch of data. Metrics
    are measured on fixed evaluation noise and fixed target samples, every
    ``metric_every`` steps and after the last step.

    Args:
        config: Hyperparameters.
        target: Sampler of the data distribution.
        seed: Master seed; the run is fully determined by it.
        logger: Logger for progress; defaults to ``driftlab.training``.
        on_record: Called with each record and the generator it was measured
            on, as soon as the record is available.
        checkpoint_dir: Where checkpoints and failure snapshots are written.

    Raises:
        NonFiniteLoss: If the loss or the gradient stops being finite. A
            snapshot of the parameters before the failing step is written to
            ``checkpoint_dir`` first.

    """
    if logger is None:
        logger = logging.getLogger("driftlab.training")
    debug = logger.isEnabledFor(logging.DEBUG)
    directory = None if checkpoint_dir is None else pathlib.Path(checkpoint_dir)
    int_seed = seed if isinstance(seed, int) else None

    init_seed, noise_seed, data_seed, eval_noise_seed, eval_data_seed, sw_seed = (
        spawn_seeds(seed, 6)
    )
    noise_rng = np.random.default_rng(noise_seed)
    data_rng = np.random.default_rng(data_seed)
    eval_noise = _sample_noise(
        np.random.default_rng(eval_noise_seed), config.sw_samples, config.noise_dim
    )
    eval_targets = target(config.sw_samples, eval_data_seed)
    dim = eval_targets.dim
    if dim != config.kernel.dim and config.backend is KERNEL:
        raise InvalidParameter("kernel", config.kernel, f"must have dimension {dim}")
    directions = projection_directions(config.sw_projections, dim, sw_seed)
    n_drift = min(config.batch_size, config.sw_samples)

    generator = MlpGenerator.init(config.noise_dim, config.hidden, dim, init_seed)
    state = AdamState.zeros(generator)
    history = TrainHistory()
    snapshots: list[Array] = []
    loss = math.nan

    def measure(step: int) -> TrainRecord:
        generated = mlp_forward(generator, eval_noise)
        probes = generated[:n_drift]
        data = eval_targets.points[:n_drift]
        if config.backend is SINKHORN:
            norm = sinkhorn_drift(
                probes, data, config.epsilon, config.sinkhorn_max_iter
            ).mean_norm()
            bandwidth = config.epsilon
        else:
            kernels = config.kernels_at(step)
            norm = mean_drift_norm(probes, data, kernels)
            bandwidth = kernels[0].bandwidth
        distance = sliced_wasserstein(generated, eval_targets, directions=directions)
        return TrainRecord(step, loss, norm, distance, bandwidth)

    def record(step: int) -> None:
        entry = measure(step)
        history.append(entry)
        logger.info(
            "step %d: loss %.4e, drift norm %.4e, SW %.4e",
            entry.step,
            entry.loss,
            entry.mean_drift_norm,
            entry.sliced_wasserstein,
        )
        if on_record is not None:
            on_record(entry, generator)

    def fail(step: int, value: float) -> NonFiniteLoss:
        snapshot = None
        if directory is not None:
            path = _checkpoint_path(directory, f"nonfinite-step-{step}.bin")
            save_checkpoint(path, generator, seed=int_seed, step=step - 1)
            snapshot = str(path)
        logger.error("non-finite loss %s at step %d", value, step)
        return NonFiniteLoss(step, value, snapshot)

    for step in range(1, config.steps + 1):
        z = _sample_noise(noise_rng, config.batch_size, config.noise_dim)
        data = target(config.batch_size, draw_seed(data_rng)).points
        if config.loss_mode is COUPLED:
            loss, grads = coupled_loss_and_grad(
                generator, z, data, config.kernels_at(step - 1), config.eta
            )
        else:
            x = mlp_forward(generator, z)
            if config.backend is SINKHORN:
                field = sinkhorn_drift(
                    x, data, config.epsilon, config.sinkhorn_max_iter, scale=config.eta
                )
                targets = x + field.vectors
            else:
                kernels = config.kernels_at(step - 1)
                targets = drift_targets(x, data, kernels, config.eta)
            loss, grads = stopgrad_loss_and_grad(generator, z, targets)

        if not (math.isfinite(loss) and grads.is_finite()):
            raise fail(step, loss)
        if debug:
            logger.debug("step %d: loss %.6e", step, loss)
        every = config.gradient_snapshot_every
        if every and step % every == 0:
            snapshots.append(grads.flatten())

        generator, state = adam_step(generator, grads, state, config.lr)

        if step % config.metric_every == 0 or step == config.steps:
            record(step)
        if (
            directory is not None
            and config.checkpoint_every
            and step % config.checkpoint_every == 0
            and step != config.steps
        ):
            path = _checkpoint_path(directory, f"step-{step}.bin")
            save_checkpoint(path, generator, seed=int_seed, step=step)

    if directory is not None:
        path = _checkpoint_path(directory, "final.bin")
        save_checkpoint(path, generator, seed=int_seed, step=config.steps)
        logger.info("wrote %s", path)

    return TrainResult(config, history, generator, snapshots, eval_noise, eval_targets)
