from __future__ import annotations

import dataclasses
import math
from collections.abc import Iterator
from typing import Any, Callable

import numpy as np
from scipy.special import logsumexp, softmax

from .exceptions import DimensionMismatch, InvalidParameter, ShapeMismatch
from .typing import Array, BoolArray, Seed


__all__ = [
    "ParticleSet",
    "GaussianMixture",
    "IsotropicGaussian",
    "sample_gmm",
    "sample_checkerboard",
    "sample_swiss_roll",
    "swiss_roll_curve",
    "in_checkerboard",
    "gmm_log_density",
    "gmm_smoothed_score",
    "gaussian_smoothed_score",
    "probe_grid",
    "Sampler",
    "TARGETS",
    "get_target",
]


class ParticleSet:
    """
    Immutable set of ``n`` points in ``d`` dimensions.

    :class:`ParticleSet` has value semantics: two sets are equal when their
    points are equal, in the same order. The underlying array is read-only.

    Raises:
        ShapeMismatch: If ``points`` isn't a non-empty two-dimensional array.
        InvalidParameter: If ``points`` contains non-finite values.

    """

    __slots__ = ["_points"]

    def __init__(self, points: Any) -> None:
        array = np.array(points, dtype=np.float64)
        if array.ndim == 1:
            array = array.reshape(-1, 1)
        if array.ndim != 2 or array.shape[0] == 0 or array.shape[1] == 0:
            raise ShapeMismatch("points", (-1, -1), array.shape)
        if not np.all(np.isfinite(array)):
            raise InvalidParameter("points", "array", "must be finite")
        array.flags.writeable = False
        self._points = array

    @property
    def points(self) -> Array:
        return self._points

    @property
    def n(self) -> int:
        return int(self._points.shape[0])

    @property
    def dim(self) -> int:
        return int(self._points.shape[1])

    def __len__(self) -> int:
        return self.n

    def __iter__(self) -> Iterator[Array]:
        return iter(self._points)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ParticleSet):
            return NotImplemented
        return bool(np.array_equal(self._points, other._points))

    def __hash__(self) -> int:
        return hash((self._points.shape, self._points.tobytes()))

    def __repr__(self) -> str:
        return f"ParticleSet(n={self.n}, dim={self.dim})"

    def translated(self, offset: Array) -> ParticleSet:
        """Return a copy shifted by ``offset``."""
        return ParticleSet(self._points + np.asarray(offset, dtype=np.float64))

    def subsample(self, n: int, seed: Seed) -> ParticleSet:
        """
        Return ``n`` points drawn without replacement.

        Returns ``self`` when ``n`` equals the size of the set.

        """
        if not 1 <= n <= self.n:
            raise InvalidParameter("n", n, f"must be between 1 and {self.n}")
        if n == self.n:
            return self
        rng = np.random.default_rng(seed)
        index = np.sort(rng.choice(self.n, size=n, replace=False))
        return ParticleSet(self._points[index])


def as_points(x: Any, dim: int | None = None) -> Array:
    """
    Coerce a point, a batch of points, or a :class:`ParticleSet` to ``(m, d)``.

    """
    if isinstance(x, ParticleSet):
        array = x.points
    else:
        array = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if dim is not None and array.shape[-1] != dim:
        raise DimensionMismatch("x", dim, array.shape[-1])
    return array


def _shaped_like(x: Any, result: Array) -> Array:
    # A single point in, a single vector out.
    if isinstance(x, ParticleSet):
        return result
    return result.reshape(np.shape(x))


@dataclasses.dataclass(frozen=True, eq=False)
class GaussianMixture:
    """
    Mixture of isotropic Gaussians sharing one component standard deviation.

    Attributes:
        weights: Mixture weights, summing to 1.
        means: Component means, one row per component.
        component_std: Standard deviation σ_p of every component.

    """

    weights: Array
    means: Array
    component_std: float

    def __post_init__(self) -> None:
        weights = np.array(self.weights, dtype=np.float64).reshape(-1)
        means = np.array(self.means, dtype=np.float64)
        if means.ndim == 1:
            means = means.reshape(-1, 1)
        if means.shape[0] != weights.shape[0]:
            raise ShapeMismatch("means", (weights.shape[0], -1), means.shape)
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise InvalidParameter("weights", weights.tolist(), "must sum to 1")
        if not np.all(np.isfinite(means)):
            raise InvalidParameter("means", means.tolist(), "must be finite")
        if not self.component_std > 0:
            raise InvalidParameter(
                "component_std", self.component_std, "must be positive"
            )
        weights.flags.writeable = False
        means.flags.writeable = False
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "means", means)

    @property
    def dim(self) -> int:
        return int(self.means.shape[1])

    @property
    def n_components(self) -> int:
        return int(self.means.shape[0])

    def mean(self) -> Array:
        """Population mean Σ w_k μ_k."""
        return self.weights @ self.means

    @classmethod
    def default_four_mode(cls, component_std: float = 0.15) -> GaussianMixture:
        """
        Equal-weight mixture with modes at (±1, ±1).

        """
        means = [[-1.0, -1.0], [-1.0, 1.0], [1.0, -1.0], [1.0, 1.0]]
        return cls(np.full(4, 0.25), np.array(means), component_std)


@dataclasses.dataclass(frozen=True, eq=False)
class IsotropicGaussian:
    """
    Gaussian ``N(mean, std² I)``.

    """

    mean: Array
    std: float

    def __post_init__(self) -> None:
        mean = np.array(self.mean, dtype=np.float64).reshape(-1)
        if not self.std > 0:
            raise InvalidParameter("std", self.std, "must be positive")
        mean.flags.writeable = False
        object.__setattr__(self, "mean", mean)

    @property
    def dim(self) -> int:
        return int(self.mean.shape[0])

    @classmethod
    def standard(cls, std: float = 1.0, dim: int = 2) -> IsotropicGaussian:
        return cls(np.zeros(dim), std)

    def sample(self, n: int, seed: Seed) -> ParticleSet:
        _check_count(n)
        rng = np.random.default_rng(seed)
        return ParticleSet(self.mean + self.std * rng.standard_normal((n, self.dim)))

    def log_density(self, x: Any, sigma: float = 0.0) -> Array:
        """
        Log-density of the Gaussian smoothed at bandwidth ``sigma``.

        """
        points = as_points(x, self.dim)
        s2 = self.std**2 + sigma**2
        sq = np.sum((points - self.mean) ** 2, axis=1)
        return -sq / (2.0 * s2) - 0.5 * self.dim * math.log(2.0 * math.pi * s2)


def _check_count(n: int) -> None:
    if n < 1:
        raise InvalidParameter("n", n, "must be at least 1")


def sample_gmm(m: GaussianMixture, n: int, seed: Seed) -> ParticleSet:
    """
    Draw ``n`` points from a Gaussian mixture.

    A component is chosen according to the weights, then a point is drawn
    around its mean.

    """
    _check_count(n)
    rng = np.random.default_rng(seed)
    components = rng.choice(m.n_components, size=n, p=m.weights)
    noise = rng.standard_normal((n, m.dim))
    return ParticleSet(m.means[components] + m.component_std * noise)


# Checkerboard: 4×4 unit cells covering [-2, 2]², black where the sum of the
# integer parts of the coordinates is even.
BOARD_LOW = -2
BOARD_SIZE = 4

_BLACK_CELLS = np.array(
    [
        (i, j)
        for i in range(BOARD_LOW, BOARD_LOW + BOARD_SIZE)
        for j in range(BOARD_LOW, BOARD_LOW + BOARD_SIZE)
        if (i + j) % 2 == 0
    ],
    dtype=np.float64,
)


def sample_checkerboard(n: int, seed: Seed) -> ParticleSet:
    """
    Draw ``n`` points uniformly on the black cells of the checkerboard.

    """
    _check_count(n)
    rng = np.random.default_rng(seed)
    cells = rng.integers(0, len(_BLACK_CELLS), size=n)
    return ParticleSet(_BLACK_CELLS[cells] + rng.random((n, 2)))


def in_checkerboard(points: Any) -> BoolArray:
    """
    Return a mask telling which points lie on a black cell.

    """
    array = as_points(points, 2)
    inside = np.all((array >= BOARD_LOW) & (array < BOARD_LOW + BOARD_SIZE), axis=1)
    parity = np.floor(array).astype(np.int64).sum(axis=1) % 2
    return inside & (parity == 0)


SWISS_ROLL_T_MIN = 1.5 * math.pi
SWISS_ROLL_T_MAX = 4.5 * math.pi
# Scales the outermost turn to radius 2.
SWISS_ROLL_SCALE = SWISS_ROLL_T_MAX / 2.0


def swiss_roll_curve(t: Array) -> Array:
    """
    Points of the noise-free spiral at parameters ``t``.

    """
    t = np.asarray(t, dtype=np.float64)
    return np.stack([t * np.cos(t), t * np.sin(t)], axis=-1) / SWISS_ROLL_SCALE


def sample_swiss_roll(n: int, seed: Seed, jitter: float = 0.05) -> ParticleSet:
    """
    Draw ``n`` points along a two-dimensional spiral with Gaussian jitter.

    """
    _check_count(n)
    if jitter < 0:
        raise InvalidParameter("jitter", jitter, "must be nonnegative")
    rng = np.random.default_rng(seed)
    t = rng.uniform(SWISS_ROLL_T_MIN, SWISS_ROLL_T_MAX, size=n)
    noise = rng.standard_normal((n, 2))
    return ParticleSet(swiss_roll_curve(t) + jitter * noise)


def _component_log_terms(m: GaussianMixture, sigma: float, points: Array) -> Array:
    # log w_k + log N(x; μ_k, s² I) for every point and component.
    s2 = m.component_std**2 + sigma**2
    sq = np.sum((points[:, None, :] - m.means[None, :, :]) ** 2, axis=-1)
    log_norm = -0.5 * m.dim * math.log(2.0 * math.pi * s2)
    with np.errstate(divide="ignore"):
        log_weights = np.log(m.weights)
    return log_weights - sq / (2.0 * s2) + log_norm


def gmm_log_density(m: GaussianMixture, sigma: float, x: Any) -> Array:
    """
    Normalized log-density of the mixture smoothed at bandwidth ``sigma``.

    Smoothing a mixture with a Gaussian of standard deviation ``sigma`` adds
    ``sigma²`` to the variance of every component.

    Returns:
        One value per point.

    """
    if sigma < 0:
        raise InvalidParameter("sigma", sigma, "must be nonnegative")
    points = as_points(x, m.dim)
    return logsumexp(_component_log_terms(m, sigma, points), axis=1)


def gmm_smoothed_score(m: GaussianMixture, sigma: float, x: Any) -> Array:
    """
    Gradient of :func:`gmm_log_density` with respect to ``x``.

    Responsibilities are computed with a softmax over components, so the score
    stays finite far away from every mode.

    Returns:
        Array with the shape of ``x``.

    """
    if sigma < 0:
        raise InvalidParameter("sigma", sigma, "must be nonnegative")
    points = as_points(x, m.dim)
    s2 = m.component_std**2 + sigma**2
    responsibilities = softmax(_component_log_terms(m, sigma, points), axis=1)
    score = (responsibilities @ m.means - points) / s2
    return _shaped_like(x, score)


def gaussian_smoothed_score(g: IsotropicGaussian, sigma: float, x: Any) -> Array:
    """
    Score ``-(x - μ) / (σ_q² + σ²)`` of the smoothed Gaussian.

    """
    if sigma < 0:
        raise InvalidParameter("sigma", sigma, "must be nonnegative")
    points = as_points(x, g.dim)
    score = -(points - g.mean) / (g.std**2 + sigma**2)
    return _shaped_like(x, score)


def probe_grid(
    low: float,
    high: float,
    n_per_axis: int,
    dim: int = 2,
) -> ParticleSet:
    """
    Regular grid of probes over ``[low, high]^dim``.

    Points are listed with the last coordinate varying fastest.

    """
    if n_per_axis < 1:
        raise InvalidParameter("n_per_axis", n_per_axis, "must be at least 1")
    if not high > low:
        raise InvalidParameter("high", high, f"must exceed low={low}")
    axis = np.linspace(low, high, n_per_axis)
    mesh = np.meshgrid(*([axis] * dim), indexing="ij")
    return ParticleSet(np.stack([c.reshape(-1) for c in mesh], axis=1))


Sampler = Callable[[int, Seed], ParticleSet]


def _sample_default_gmm(n: int, seed: Seed) -> ParticleSet:
    return sample_gmm(GaussianMixture.default_four_mode(), n, seed)


def _sample_swiss_roll(n: int, seed: Seed) -> ParticleSet:
    return sample_swiss_roll(n, seed)


TARGETS: dict[str, Sampler] = {
    "gmm4": _sample_default_gmm,
    "checkerboard": sample_checkerboard,
    "swiss-roll": _sample_swiss_roll,
}


def get_target(name: str) -> Sampler:
    """
    Look up a sampler of a named two-dimensional target.

    Raises:
        InvalidParameter: If ``name`` isn't one of :data:`TARGETS`.

    """
    try:
        return TARGETS[name]
    except KeyError:
        choices = ", ".join(sorted(TARGETS))
        raise InvalidParameter("target", name, f"must be one of {choices}") from None
