from __future__ import annotations

import dataclasses
import enum
import math
from typing import Union, overload

import numpy as np

from .exceptions import DimensionMismatch, InvalidParameter
from .typing import Array


__all__ = [
    "Family",
    "KernelSpec",
    "kernel_eval",
    "kernel_fourier",
    "log_kernel_matrix",
    "ScheduleKind",
    "BandwidthSchedule",
    "schedule_sigma",
    "schedule_freeze_time",
]


class Family(enum.Enum):
    """Kernel families supported by the drift operators."""

    GAUSSIAN = "gaussian"
    LAPLACIAN = "laplacian"


GAUSSIAN = Family.GAUSSIAN
LAPLACIAN = Family.LAPLACIAN


@dataclasses.dataclass(frozen=True)
class KernelSpec:
    """
    Positive, even, translation-invariant kernel.

    Attributes:
        family: :attr:`~Family.GAUSSIAN` or :attr:`~Family.LAPLACIAN`.
        bandwidth: σ for the Gaussian kernel, τ for the Laplacian kernel.
        dim: Dimension of the points the kernel is evaluated on.

    Kernels are unnormalized: the Gaussian kernel is ``exp(-|x-y|²/2σ²)`` and
    the Laplacian kernel is ``exp(-|x-y|/τ)``. Drift operators are ratios of
    kernel sums, so normalization constants cancel.

    """

    family: Family
    bandwidth: float
    dim: int = 2

    def __post_init__(self) -> None:
        if not (self.bandwidth > 0 and math.isfinite(self.bandwidth)):
            raise InvalidParameter("bandwidth", self.bandwidth, "must be positive")
        if self.dim < 1:
            raise InvalidParameter("dim", self.dim, "must be at least 1")

    @classmethod
    def gaussian(cls, sigma: float, dim: int = 2) -> KernelSpec:
        return cls(GAUSSIAN, sigma, dim)

    @classmethod
    def laplacian(cls, tau: float, dim: int = 2) -> KernelSpec:
        return cls(LAPLACIAN, tau, dim)

    def with_bandwidth(self, bandwidth: float) -> KernelSpec:
        """
        Return the same kernel family with another bandwidth.

        """
        return dataclasses.replace(self, bandwidth=bandwidth)

    def __str__(self) -> str:
        symbol = "σ" if self.family is GAUSSIAN else "τ"
        return f"{self.family.value}({symbol}={self.bandwidth:g}, d={self.dim})"


def log_kernel_matrix(spec: KernelSpec, x: Array, y: Array) -> Array:
    """
    Compute log-weights ``log k(x_i, y_j)`` for all pairs.

    Args:
        spec: Kernel.
        x: Points of shape ``(m, d)``.
        y: Points of shape ``(n, d)``.

    Returns:
        Matrix of shape ``(m, n)``.

    Raises:
        DimensionMismatch: If ``x`` or ``y`` doesn't have dimension ``spec.dim``.

    """
    if x.shape[-1] != spec.dim:
        raise DimensionMismatch("x", spec.dim, x.shape[-1])
    if y.shape[-1] != spec.dim:
        raise DimensionMismatch("y", spec.dim, y.shape[-1])
    # Expanding |x-y|² as |x|² - 2 x·y + |y|² loses precision for nearby
    # points; the broadcasted difference keeps the self-distance exactly 0.
    sq_dist = np.sum((x[:, None, :] - y[None, :, :]) ** 2, axis=-1)
    if spec.family is GAUSSIAN:
        return -sq_dist / (2.0 * spec.bandwidth**2)
    else:
        return -np.sqrt(sq_dist) / spec.bandwidth


def kernel_eval(spec: KernelSpec, x: Array, y: Array) -> float:
    """
    Evaluate the kernel on two points.

    Raises:
        DimensionMismatch: If a point doesn't have dimension ``spec.dim``.

    """
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    y = np.asarray(y, dtype=np.float64).reshape(1, -1)
    return float(np.exp(log_kernel_matrix(spec, x, y)[0, 0]))


@overload
def kernel_fourier(spec: KernelSpec, xi_mag: float) -> float: ...


@overload
def kernel_fourier(spec: KernelSpec, xi_mag: Array) -> Array: ...


def kernel_fourier(spec: KernelSpec, xi_mag: float | Array) -> float | Array:
    """
    Evaluate the radial Fourier profile of the kernel.

    The Gaussian profile is ``exp(-σ²|ξ|²/2)``. The Laplacian profile is
    ``(1 + τ²|ξ|²)^(-(d+1)/2)`` with its proportionality constant set to 1.
    Both equal 1 at ``ξ = 0`` and decrease with ``|ξ|``.

    Raises:
        InvalidParameter: If ``xi_mag`` is negative.

    """
    xi = np.asarray(xi_mag, dtype=np.float64)
    if np.any(xi < 0):
        raise InvalidParameter("xi_mag", xi_mag, "must be nonnegative")
    b2 = spec.bandwidth**2
    if spec.family is GAUSSIAN:
        value = np.exp(-b2 * xi**2 / 2.0)
    else:
        value = (1.0 + b2 * xi**2) ** (-(spec.dim + 1) / 2.0)
    return float(value) if value.ndim == 0 else value


class ScheduleKind(enum.Enum):
    """Shapes of bandwidth schedules σ(t)."""

    CONSTANT = "constant"
    EXPONENTIAL = "exponential"
    LINEAR = "linear"
    COSINE = "cosine"


CONSTANT = ScheduleKind.CONSTANT
EXPONENTIAL = ScheduleKind.EXPONENTIAL
LINEAR = ScheduleKind.LINEAR
COSINE = ScheduleKind.COSINE


@dataclasses.dataclass(frozen=True)
class BandwidthSchedule:
    """
    Non-increasing bandwidth policy σ(t), held at ``sigma_min`` once reached.

    Attributes:
        kind: Shape of the schedule.
        sigma0: Bandwidth at ``t = 0``.
        sigma_min: Floor; defaults to ``sigma0``.
        rate: Decay rate ``r`` of :attr:`~ScheduleKind.EXPONENTIAL` schedules.
        horizon: Horizon ``T`` of :attr:`~ScheduleKind.LINEAR` and
            :attr:`~ScheduleKind.COSINE` schedules.

    """

    kind: ScheduleKind
    sigma0: float
    sigma_min: float | None = None
    rate: float | None = None
    horizon: float | None = None

    def __post_init__(self) -> None:
        if not self.sigma0 > 0:
            raise InvalidParameter("sigma0", self.sigma0, "must be positive")
        if self.sigma_min is None:
            object.__setattr__(self, "sigma_min", self.sigma0)
        assert self.sigma_min is not None
        if not self.sigma_min > 0:
            raise InvalidParameter("sigma_min", self.sigma_min, "must be positive")
        if self.sigma_min > self.sigma0:
            raise InvalidParameter(
                "sigma_min", self.sigma_min, f"must not exceed sigma0={self.sigma0}"
            )
        if self.kind is EXPONENTIAL:
            if self.rate is None or not self.rate > 0:
                raise InvalidParameter("rate", self.rate, "must be positive")
        if self.kind in (LINEAR, COSINE):
            if self.horizon is None or not self.horizon > 0:
                raise InvalidParameter("horizon", self.horizon, "must be positive")

    @property
    def floor(self) -> float:
        assert self.sigma_min is not None
        return self.sigma_min

    @classmethod
    def constant(cls, sigma: float) -> BandwidthSchedule:
        return cls(CONSTANT, sigma)

    @classmethod
    def exponential(
        cls,
        sigma0: float,
        sigma_min: float,
        rate: float | None = None,
        *,
        sweep_time: float = 400.0,
    ) -> BandwidthSchedule:
        """
        Build ``σ(t) = σ0 exp(-rt)``.

        When ``rate`` is omitted, it's chosen so that σ reaches ``sigma_min``
        after ``sweep_time``.

        """
        if rate is None:
            rate = math.log(sigma0 / sigma_min) / sweep_time
        return cls(EXPONENTIAL, sigma0, sigma_min, rate=rate)

    @classmethod
    def linear(
        cls, sigma0: float, sigma_min: float, horizon: float = 1500.0
    ) -> BandwidthSchedule:
        """Build ``σ(t) = σ0 (1 - t/T)``."""
        return cls(LINEAR, sigma0, sigma_min, horizon=horizon)

    @classmethod
    def cosine(
        cls, sigma0: float, sigma_min: float, horizon: float = 1500.0
    ) -> BandwidthSchedule:
        """Build ``σ(t) = σ0 cos(πt / 2T)``."""
        return cls(COSINE, sigma0, sigma_min, horizon=horizon)

    def __str__(self) -> str:
        return self.kind.value


TimeLike = Union[float, Array]


@overload
def schedule_sigma(s: BandwidthSchedule, t: float) -> float: ...


@overload
def schedule_sigma(s: BandwidthSchedule, t: Array) -> Array: ...


def schedule_sigma(s: BandwidthSchedule, t: TimeLike) -> TimeLike:
    """
    Evaluate σ(t), clamped below at ``sigma_min``.

    Accepts a scalar or an array of times.

    Raises:
        InvalidParameter: If a time is negative.

    """
    times = np.asarray(t, dtype=np.float64)
    if np.any(times < 0):
        raise InvalidParameter("t", t, "must be nonnegative")
    if s.kind is CONSTANT:
        value = np.full_like(times, s.sigma0)
    elif s.kind is EXPONENTIAL:
        assert s.rate is not None
        value = s.sigma0 * np.exp(-s.rate * times)
    else:
        assert s.horizon is not None
        # Past the horizon, linear goes negative and cosine comes back up.
        u = np.minimum(times, s.horizon) / s.horizon
        if s.kind is LINEAR:
            value = s.sigma0 * (1.0 - u)
        else:
            value = s.sigma0 * np.cos(np.pi * u / 2.0)
    value = np.maximum(value, s.floor)
    return float(value) if value.ndim == 0 else value


def schedule_freeze_time(s: BandwidthSchedule) -> float:
    """
    Return the first time at which σ(t) reaches ``sigma_min``.

    """
    ratio = s.floor / s.sigma0
    if s.kind is CONSTANT or ratio == 1.0:
        return 0.0
    elif s.kind is EXPONENTIAL:
        assert s.rate is not None
        return math.log(1.0 / ratio) / s.rate
    assert s.horizon is not None
    if s.kind is LINEAR:
        return s.horizon * (1.0 - ratio)
    else:
        return s.horizon * 2.0 / math.pi * math.acos(ratio)
