from __future__ import annotations

import dataclasses
import logging

from .drift import drift_field, multiscale_drift_field
from .exceptions import InvalidParameter
from .kernels import BandwidthSchedule, KernelSpec, schedule_sigma
from .metrics import projection_directions, sliced_wasserstein
from .targets import ParticleSet
from .typing import LoggerLike, Seed
from .utils import spawn_seeds


__all__ = ["FlowRecord", "FlowHistory", "particle_flow"]


@dataclasses.dataclass(frozen=True)
class FlowRecord:
    """
    State of a particle flow at one recorded step.

    """

    step: int
    time: float
    bandwidth: float
    mean_drift_norm: float
    sliced_wasserstein: float


@dataclasses.dataclass(frozen=True, eq=False)
class FlowHistory:
    """
    Records of a particle flow and its final particles.

    Attributes:
        records: One record every ``record_every`` steps, plus the last step.
        snapshots: Particles at each recorded step.
        final: Particles after the last step.

    """

    records: list[FlowRecord]
    snapshots: list[ParticleSet]
    final: ParticleSet


def particle_flow(
    initial: ParticleSet,
    p_samples: ParticleSet,
    kernel: KernelSpec,
    step: float,
    n_steps: int,
    *,
    schedule: BandwidthSchedule | None = None,
    extra_kernels: tuple[KernelSpec, ...] = (),
    record_every: int = 10,
    n_proj: int = 200,
    seed: Seed = 0,
    logger: LoggerLike | None = None,
) -> FlowHistory:
    """
    Integrate ``dx/dt = V(x)`` with explicit Euler steps.

    The particles are both the probes and the repelling samples of the
    drift, so the generated distribution moves with them.

    Args:
        initial: Initial particles.
        p_samples: Data samples attracting the particles.
        kernel: Kernel of the drift.
        step: Time step.
        n_steps: Number of steps.
        schedule: Bandwidth schedule evaluated at each step time; replaces the
            bandwidth of ``kernel``.
        extra_kernels: Additional kernels summed into a multiscale drift.
        record_every: Record metrics every this many steps.
        n_proj: Number of projections of the sliced Wasserstein distance.
        seed: Seed of the projections and of subsampling.
        logger: Logger for progress; defaults to ``driftlab.flow``.

    """
    if not step > 0:
        raise InvalidParameter("step", step, "must be positive")
    if n_steps < 1:
        raise InvalidParameter("n_steps", n_steps, "must be at least 1")
    if record_every < 1:
        raise InvalidParameter("record_every", record_every, "must be at least 1")
    if logger is None:
        logger = logging.getLogger("driftlab.flow")

    projection_seed, subsample_seed = spawn_seeds(seed, 2)
    directions = projection_directions(n_proj, initial.dim, projection_seed)
    n_compare = min(initial.n, p_samples.n)
    reference = p_samples.subsample(n_compare, subsample_seed)

    records: list[FlowRecord] = []
    snapshots: list[ParticleSet] = []
    points = initial.points
    for index in range(n_steps + 1):
        time = index * step
        spec = kernel
        if schedule is not None:
            spec = kernel.with_bandwidth(schedule_sigma(schedule, time))
        if extra_kernels:
            specs = (spec,) + extra_kernels
            field = multiscale_drift_field(points, p_samples, points, specs)
        else:
            field = drift_field(points, p_samples, points, spec)

        if index % record_every == 0 or index == n_steps:
            current = ParticleSet(points)
            distance = sliced_wasserstein(
                current.subsample(n_compare, subsample_seed),
                reference,
                directions=directions,
            )
            norm = field.mean_norm()
            record = FlowRecord(index, time, spec.bandwidth, norm, distance)
            records.append(record)
            snapshots.append(current)
            logger.info(
                "flow step %d: drift norm %.3e, SW %.3e",
                index,
                record.mean_drift_norm,
                record.sliced_wasserstein,
            )
        if index == n_steps:
            break
        points = points + step * field.vectors

    return FlowHistory(records, snapshots, ParticleSet(points))
