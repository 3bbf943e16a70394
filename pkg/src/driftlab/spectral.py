"""
Linearized Fourier mode dynamics of the drift flow.

Near equilibrium, each Fourier mode of the density perturbation decays
independently at a rate that depends on its wavenumber ``k`` and on the kernel
bandwidth::

    Gaussian kernel (σ):   λ(k) = σ² k² exp(-σ² k² / 2)
    Laplacian kernel (τ):  λ(k) = 2 τ³ k² / (1 + τ² k²)

The Gaussian rate peaks at ``k = √2 / σ`` and vanishes exponentially beyond,
so high frequencies converge very slowly for a fixed bandwidth. Shrinking the
bandwidth over time sweeps the peak across frequencies.

"""

from __future__ import annotations

import dataclasses
import logging
import math
from collections.abc import Mapping, Sequence
from typing import Callable, Union

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .exceptions import InvalidParameter
from .kernels import (
    EXPONENTIAL,
    GAUSSIAN,
    BandwidthSchedule,
    Family,
    KernelSpec,
    schedule_freeze_time,
    schedule_sigma,
)
from .typing import Array


__all__ = [
    "DecayRateSpec",
    "SpectralState",
    "ModeDecayResult",
    "AblationResult",
    "decay_rate",
    "gaussian_cutoff",
    "analytic_convergence_time",
    "simulate_mode_decay",
    "cumulative_decay",
    "exponential_cumulative_decay",
    "annealed_convergence_time",
    "annealing_bound",
    "schedule_curve",
    "schedule_ablation",
]


logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class DecayRateSpec:
    """
    Kernel family and bandwidth determining per-mode decay rates.

    """

    family: Family
    parameter: float

    def __post_init__(self) -> None:
        if not self.parameter > 0:
            raise InvalidParameter("parameter", self.parameter, "must be positive")

    @classmethod
    def gaussian(cls, sigma: float) -> DecayRateSpec:
        return cls(GAUSSIAN, sigma)

    @classmethod
    def laplacian(cls, tau: float) -> DecayRateSpec:
        return cls(Family.LAPLACIAN, tau)

    @classmethod
    def from_kernel(cls, spec: KernelSpec) -> DecayRateSpec:
        return cls(spec.family, spec.bandwidth)


def _rate(family: Family, parameter: float | Array, k: float | Array) -> Array:
    b2k2 = np.asarray(parameter) ** 2 * np.asarray(k) ** 2
    if family is GAUSSIAN:
        return np.asarray(b2k2 * np.exp(-b2k2 / 2.0))
    else:
        return np.asarray(2.0 * np.asarray(parameter) * b2k2 / (1.0 + b2k2))


def decay_rate(spec: DecayRateSpec, k: float | Array) -> float | Array:
    """
    Decay rate of the modes with wavenumber ``k``.

    Raises:
        InvalidParameter: If a wavenumber isn't positive.

    """
    modes = np.asarray(k, dtype=np.float64)
    if np.any(modes <= 0):
        raise InvalidParameter("k", k, "must be positive")
    rate = _rate(spec.family, spec.parameter, modes)
    return float(rate) if rate.ndim == 0 else rate


def gaussian_cutoff(sigma: float) -> float:
    """Wavenumber ``√2 / σ`` where the Gaussian decay rate peaks."""
    if not sigma > 0:
        raise InvalidParameter("sigma", sigma, "must be positive")
    return math.sqrt(2.0) / sigma


def _check_eps(eps: float) -> None:
    if not 0 < eps < 1:
        raise InvalidParameter("eps", eps, "must be between 0 and 1")


def analytic_convergence_time(
    spec: DecayRateSpec,
    k: float | Array,
    eps: float,
) -> float | Array:
    """
    Time ``log(1/ε) / λ(k)`` to reduce a mode by a factor ``1/ε``.

    Returns ``inf`` where the rate underflows to zero.

    """
    _check_eps(eps)
    rate = np.asarray(decay_rate(spec, k))
    with np.errstate(divide="ignore"):
        time = np.where(rate > 0, math.log(1.0 / eps) / rate, math.inf)
    return float(time) if time.ndim == 0 else time


@dataclasses.dataclass(frozen=True, eq=False)
class SpectralState:
    """
    Amplitudes of the tracked modes at time ``t``.

    """

    modes: Array
    amplitudes: Array
    time: float


@dataclasses.dataclass(frozen=True, eq=False)
class ModeDecayResult:
    """
    Threshold-crossing times measured by :func:`simulate_mode_decay`.

    Attributes:
        modes: Wavenumbers.
        times: First time each amplitude fell below ``eps`` times its initial
            value; ``inf`` for modes that didn't get there by ``t_max``.
        dt: Time step of the simulation.
        final: Amplitudes when the simulation stopped.
        curve_times: Times at which :attr:`total_error` was recorded.
        total_error: Sum of amplitudes over modes at :attr:`curve_times`.

    """

    modes: Array
    times: Array
    dt: float
    final: SpectralState
    curve_times: Array
    total_error: Array

    @property
    def converged(self) -> Array:
        return np.isfinite(self.times)


RateSource = Union[DecayRateSpec, BandwidthSchedule]


# Steps simulated per vectorized block.
BLOCK_STEPS = 4096


def _bandwidth_range(source: RateSource) -> tuple[float, float]:
    if isinstance(source, DecayRateSpec):
        return source.parameter, source.parameter
    return source.sigma0, source.floor


def simulate_mode_decay(
    source: RateSource,
    modes: Sequence[float] | Array,
    *,
    amplitude: float = 1e-6,
    eps: float = 1e-3,
    dt: float | None = None,
    t_max: float = 1e4,
    family: Family = GAUSSIAN,
    record_every: int | None = None,
    record_until: float = 0.0,
) -> ModeDecayResult:
    """
    Step mode amplitudes forward and record threshold-crossing times.

    Over each step, amplitudes are multiplied by ``exp(-λ(k, σ) dt)`` with σ
    evaluated at the middle of the step. For a fixed bandwidth this update is
    exact. Amplitudes are tracked in log scale, so tiny values don't
    underflow.

    Args:
        source: Fixed rate specification, or bandwidth schedule.
        modes: Positive wavenumbers.
        amplitude: Initial amplitude of every mode.
        eps: Convergence threshold, relative to the initial amplitude.
        dt: Time step; defaults to ``min(0.01, 0.1 / λ_max)`` where ``λ_max``
            is the largest rate the run can reach.
        t_max: Simulation horizon; modes not converged by then get ``inf``.
        family: Kernel family of a schedule; ignored for a fixed spec.
        record_every: Record the total amplitude every this many steps.
        record_until: Keep simulating until this time even when all modes
            have converged, for the total amplitude curve.

    """
    k = np.asarray(modes, dtype=np.float64)
    if k.ndim != 1 or len(k) == 0 or np.any(k <= 0):
        raise InvalidParameter("modes", list(k.reshape(-1)), "must be positive")
    if not amplitude > 0:
        raise InvalidParameter("amplitude", amplitude, "must be positive")
    _check_eps(eps)
    if not t_max > 0:
        raise InvalidParameter("t_max", t_max, "must be positive")
    if record_every is not None and record_every < 1:
        raise InvalidParameter("record_every", record_every, "must be at least 1")

    if isinstance(source, DecayRateSpec):
        family = source.family
        schedule = BandwidthSchedule.constant(source.parameter)
    else:
        schedule = source

    if dt is None:
        high, low = _bandwidth_range(source)
        rate_bound = max(
            float(np.max(_rate(family, high, k))),
            float(np.max(_rate(family, low, k))),
        )
        if family is GAUSSIAN and high != low:
            # The rate of a mode passes through its peak as σ shrinks.
            rate_bound = max(rate_bound, 2.0 / math.e)
        dt = min(0.01, 0.1 / rate_bound) if rate_bound > 0 else 0.01
    if not dt > 0:
        raise InvalidParameter("dt", dt, "must be positive")

    log_threshold = math.log(eps)
    log_amplitude = np.zeros_like(k)  # relative to the initial amplitude
    times = np.full_like(k, math.inf)
    curve_times: list[Array] = []
    curve_values: list[Array] = []
    if record_every is not None:
        curve_times.append(np.zeros(1))
        curve_values.append(np.array([amplitude * len(k)]))

    n_total = int(math.ceil(t_max / dt))
    n_done = 0
    while n_done < n_total:
        converged = np.isfinite(times)
        if np.all(converged) and n_done * dt >= record_until:
            break
        n_block = min(BLOCK_STEPS, n_total - n_done)
        steps = n_done + np.arange(n_block)
        sigma = schedule_sigma(schedule, (steps + 0.5) * dt)
        rates = _rate(family, sigma[:, None], k[None, :])
        trajectory = log_amplitude + np.cumsum(-rates * dt, axis=0)

        below = trajectory < log_threshold
        crossed = below.any(axis=0) & ~converged
        if np.any(crossed):
            first = np.argmax(below[:, crossed], axis=0)
            times[crossed] = (n_done + first + 1) * dt

        if record_every is not None:
            ends = steps + 1
            rows = np.flatnonzero(ends % record_every == 0)
            curve_times.append(ends[rows] * dt)
            curve_values.append(amplitude * np.exp(trajectory[rows]).sum(axis=1))

        log_amplitude = trajectory[-1]
        n_done += n_block

    unconverged = int(np.sum(~np.isfinite(times)))
    if unconverged:
        logger.info(
            "%d of %d modes didn't converge by t=%g", unconverged, len(k), t_max
        )

    final = SpectralState(k, amplitude * np.exp(log_amplitude), n_done * dt)
    return ModeDecayResult(
        modes=k,
        times=times,
        dt=dt,
        final=final,
        curve_times=np.concatenate(curve_times) if curve_times else np.zeros(0),
        total_error=np.concatenate(curve_values) if curve_values else np.zeros(0),
    )


def _integrand(
    schedule: BandwidthSchedule,
    family: Family,
    k: float,
) -> Callable[[float], float]:
    def rate_at(t: float) -> float:
        return float(_rate(family, schedule_sigma(schedule, t), k))

    return rate_at


def cumulative_decay(
    schedule: BandwidthSchedule,
    k: float,
    t: float,
    family: Family = GAUSSIAN,
) -> float:
    """
    Integral of the decay rate of mode ``k`` over ``[0, t]``.

    The part before the freeze time is integrated adaptively; after the
    freeze time the rate is constant.

    """
    if not k > 0:
        raise InvalidParameter("k", k, "must be positive")
    if t < 0:
        raise InvalidParameter("t", t, "must be nonnegative")
    t_freeze = schedule_freeze_time(schedule)
    head = min(t, t_freeze)
    total = 0.0
    if head > 0:
        rate_at = _integrand(schedule, family, k)
        total, _ = quad(rate_at, 0.0, head, epsabs=0.0, epsrel=1e-10, limit=200)
    if t > t_freeze:
        total += (t - t_freeze) * float(_rate(family, schedule.floor, k))
    return float(total)


def exponential_cumulative_decay(
    schedule: BandwidthSchedule,
    k: float,
    t: float,
) -> float:
    """
    Closed form of :func:`cumulative_decay` for exponential Gaussian annealing.

    Before the freeze time, the integral is ``(1/r) [exp(-σ(t)² k² / 2) -
    exp(-σ0² k² / 2)]``.

    """
    if schedule.kind is not EXPONENTIAL:
        raise InvalidParameter("schedule", schedule.kind.value, "must be exponential")
    assert schedule.rate is not None
    t_freeze = schedule_freeze_time(schedule)
    head = min(t, t_freeze)
    sigma = schedule_sigma(schedule, head)
    total = (
        math.exp(-(sigma**2) * k**2 / 2.0)
        - math.exp(-(schedule.sigma0**2) * k**2 / 2.0)
    ) / schedule.rate
    if t > t_freeze:
        total += (t - t_freeze) * float(_rate(GAUSSIAN, schedule.floor, k))
    return total


def annealed_convergence_time(
    schedule: BandwidthSchedule,
    k: float,
    eps: float,
    family: Family = GAUSSIAN,
) -> float:
    """
    Time ``T`` at which the cumulative decay of mode ``k`` reaches ``log(1/ε)``.

    When the target is reached before the freeze time, ``T`` is found by
    root finding on :func:`cumulative_decay`. Otherwise the constant rate at
    ``sigma_min`` gives ``T`` in closed form. Returns ``inf`` when that rate
    is zero.

    """
    _check_eps(eps)
    target = math.log(1.0 / eps)
    t_freeze = schedule_freeze_time(schedule)
    at_freeze = cumulative_decay(schedule, k, t_freeze, family)
    if at_freeze >= target:
        return float(
            brentq(
                lambda t: cumulative_decay(schedule, k, t, family) - target,
                0.0,
                t_freeze,
                xtol=1e-12,
                rtol=1e-12,
            )
        )
    floor_rate = float(_rate(family, schedule.floor, k))
    if floor_rate <= 0:
        return math.inf
    return t_freeze + (target - at_freeze) / floor_rate


def annealing_bound(
    sigma0: float,
    sigma_min: float,
    r: float,
    k_max: float,
    eps: float,
) -> float:
    """
    Upper bound on the time exponential annealing needs for all modes up to
    ``k_max``::

        (1/r) log(σ0 / σ_min) + log(1/ε) / λ_min

    where ``λ_min`` is the Gaussian rate of mode ``k_max`` at ``σ_min``.
    ``r`` may be ``inf``.

    """
    if not 0 < sigma_min <= sigma0:
        raise InvalidParameter("sigma_min", sigma_min, f"must be in (0, {sigma0}]")
    if not r > 0:
        raise InvalidParameter("r", r, "must be positive")
    if not k_max > 0:
        raise InvalidParameter("k_max", k_max, "must be positive")
    _check_eps(eps)
    sweep = 0.0 if math.isinf(r) else math.log(sigma0 / sigma_min) / r
    rate_min = float(_rate(GAUSSIAN, sigma_min, k_max))
    return sweep + math.log(1.0 / eps) / rate_min


def schedule_curve(schedule: BandwidthSchedule, times: Array) -> Array:
    """Bandwidth σ(t) at each time."""
    return np.asarray(schedule_sigma(schedule, np.asarray(times, dtype=np.float64)))


@dataclasses.dataclass(frozen=True, eq=False)
class AblationResult:
    """
    Convergence times and total amplitude curves per schedule.

    Attributes:
        modes: Wavenumbers.
        simulations: Simulation result per schedule name.
        analytic: Root-finding convergence times per schedule name.

    """

    modes: Array
    simulations: dict[str, ModeDecayResult]
    analytic: dict[str, Array]

    def time_rows(self) -> list[tuple[str, float, float, float]]:
        """Rows ``(schedule, k, T_measured, T_analytic)``."""
        return [
            (name, float(k), float(measured), float(expected))
            for name, result in self.simulations.items()
            for k, measured, expected in zip(
                self.modes, result.times, self.analytic[name]
            )
        ]

    def curve_rows(self) -> list[tuple[str, float, float]]:
        """Rows ``(schedule, t, E)``."""
        return [
            (name, float(t), float(e))
            for name, result in self.simulations.items()
            for t, e in zip(result.curve_times, result.total_error)
        ]

    def speedup(self, slower: str, faster: str, k: float) -> float:
        """Ratio of convergence times of mode ``k`` between two schedules."""
        index = int(np.argmin(np.abs(self.modes - k)))
        slow = self.simulations[slower].times[index]
        fast = self.simulations[faster].times[index]
        return float(slow / fast)


# Time step of simulations that record total amplitude curves, so that the
# curves share their time grid.
CURVE_DT = 0.01


def schedule_ablation(
    schedules: Mapping[str, BandwidthSchedule],
    modes: Sequence[float] | Array,
    eps: float = 1e-3,
    *,
    amplitude: float = 1e-6,
    t_max: float = 1e4,
    curve_step: float = 1.0,
    curve_horizon: float = 0.0,
) -> AblationResult:
    """
    Compare bandwidth schedules on the same modes.

    For each schedule, simulates the mode amplitudes, computes convergence
    times by root finding, and records the total amplitude every
    ``curve_step`` time units up to at least ``curve_horizon``.

    """
    if len(schedules) == 0:
        raise InvalidParameter("schedules", [], "must not be empty")
    first = next(iter(schedules.values()))
    for name, schedule in schedules.items():
        if schedule.sigma0 != first.sigma0 or schedule.floor != first.floor:
            raise InvalidParameter(
                "schedules",
                name,
                f"must start at sigma0={first.sigma0} and stop at "
                f"sigma_min={first.floor}",
            )
    k = np.asarray(modes, dtype=np.float64)
    simulations: dict[str, ModeDecayResult] = {}
    analytic: dict[str, Array] = {}
    for name, schedule in schedules.items():
        dt = CURVE_DT
        record_every = max(1, int(round(curve_step / dt)))
        simulations[name] = simulate_mode_decay(
            schedule,
            k,
            amplitude=amplitude,
            eps=eps,
            dt=dt,
            t_max=t_max,
            record_every=record_every,
            record_until=curve_horizon,
        )
        analytic[name] = np.array(
            [annealed_convergence_time(schedule, float(mode), eps) for mode in k]
        )
        logger.info(
            "schedule %s: slowest mode converged at t=%.1f",
            name,
            float(np.max(simulations[name].times)),
        )
    return AblationResult(k, simulations, analytic)
