from __future__ import annotations

import dataclasses
import json
import logging
import math
import pathlib
from collections.abc import Sequence
from typing import Any

import numpy as np
from scipy.stats import pearsonr

from .drift import drift_field, multiscale_drift_field
from .exceptions import InsufficientData, InvalidParameter, UnequalSampleCounts
from .kernels import KernelSpec
from .targets import ParticleSet, as_points
from .typing import Array, Seed
from .workers import chunk_bounds, map_chunks


__all__ = [
    "MetricReport",
    "projection_directions",
    "sliced_wasserstein",
    "sliced_wasserstein_report",
    "mean_drift_norm",
    "loglog_correlation",
]


logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class MetricReport:
    """
    Value of a metric together with how it was measured.

    Attributes:
        name: Name of the metric, e.g. ``"sliced_wasserstein"``.
        value: Measured value.
        n_samples: Number of samples per distribution.
        n_projections: Number of projections, or 0 when not applicable.
        seed: Seed of the projections, if any.
        step: Training step or flow step the value refers to, if any.

    """

    name: str
    value: float
    n_samples: int
    n_projections: int = 0
    seed: int | None = None
    step: int | None = None

    def __post_init__(self) -> None:
        if not math.isfinite(self.value):
            raise InvalidParameter(self.name, self.value, "must be finite")

    def to_json(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def append_to(self, path: str | pathlib.Path) -> None:
        """Append the report as one JSON line."""
        with open(path, "a", encoding="utf-8") as handle:
            handle.write(json.dumps(self.to_json(), sort_keys=True) + "\n")


def projection_directions(n_proj: int, dim: int, seed: Seed) -> Array:
    """
    Draw ``n_proj`` directions uniformly on the unit sphere.

    The same seed always yields the same directions.

    """
    if n_proj < 1:
        raise InvalidParameter("n_proj", n_proj, "must be at least 1")
    rng = np.random.default_rng(seed)
    directions = rng.standard_normal((n_proj, dim))
    return directions / np.linalg.norm(directions, axis=1, keepdims=True)


def sliced_wasserstein(
    x: ParticleSet | Array,
    y: ParticleSet | Array,
    n_proj: int = 200,
    seed: Seed = 0,
    *,
    directions: Array | None = None,
) -> float:
    """
    Sliced 2-Wasserstein distance between two equal-size sample sets.

    Both sets are projected on random unit directions. Along each direction,
    sorted projections are matched in order. The result is the square root
    of the mean squared displacement, averaged over directions.

    Args:
        x: First sample set.
        y: Second sample set, of the same size.
        n_proj: Number of directions.
        seed: Seed of the directions.
        directions: Explicit directions, overriding ``n_proj`` and ``seed``.

    Raises:
        UnequalSampleCounts: If the sets differ in size.

    """
    a = as_points(x)
    b = as_points(y, a.shape[1])
    if len(a) != len(b):
        raise UnequalSampleCounts(len(a), len(b))
    if directions is None:
        directions = projection_directions(n_proj, a.shape[1], seed)

    def evaluate(start: int, stop: int) -> Array:
        chunk = directions[start:stop]
        proj_a = np.sort(a @ chunk.T, axis=0)
        proj_b = np.sort(b @ chunk.T, axis=0)
        return np.mean((proj_a - proj_b) ** 2, axis=0)

    bounds = chunk_bounds(len(directions), 2 * len(a))
    squared = np.concatenate(map_chunks(evaluate, bounds))
    return float(np.sqrt(np.mean(squared)))


def sliced_wasserstein_report(
    x: ParticleSet,
    y: ParticleSet,
    n_proj: int = 200,
    seed: int = 0,
    step: int | None = None,
) -> MetricReport:
    value = sliced_wasserstein(x, y, n_proj, seed)
    return MetricReport("sliced_wasserstein", value, x.n, n_proj, seed, step)


def mean_drift_norm(
    x_gen: ParticleSet | Array,
    p_samples: ParticleSet | Array,
    spec: KernelSpec | Sequence[KernelSpec],
) -> float:
    """
    Mean Euclidean norm of the kernel drift over generated points.

    Generated points serve both as probes and as the repelling samples. With
    several kernels, the drift is their multiscale sum.

    """
    if isinstance(spec, KernelSpec):
        return drift_field(x_gen, p_samples, x_gen, spec).mean_norm()
    return multiscale_drift_field(x_gen, p_samples, x_gen, spec).mean_norm()


# Values at or below this are dropped before taking logarithms.
LOG_FLOOR = 1e-300


def loglog_correlation(a: Sequence[float] | Array, b: Sequence[float] | Array) -> float:
    """
    Pearson correlation between ``log a`` and ``log b``.

    Pairs where either value is at or below 1e-300 are dropped with a
    warning.

    Raises:
        InsufficientData: If fewer than three pairs remain.

    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise UnequalSampleCounts(len(a), len(b))
    valid = (a > LOG_FLOOR) & (b > LOG_FLOOR) & np.isfinite(a) & np.isfinite(b)
    if not np.all(valid):
        logger.warning(
            "dropped %d of %d pairs with non-positive values",
            int((~valid).sum()),
            len(valid),
        )
    if valid.sum() < 3:
        raise InsufficientData("log-log correlation", 3, int(valid.sum()))
    return float(pearsonr(np.log(a[valid]), np.log(b[valid])).statistic)
