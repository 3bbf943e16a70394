"""
Loss landscape of a trained generator along principal gradient directions.

Gradients recorded during training are centered and decomposed; the two
leading principal directions ``d1, d2`` span a plane through the trained
parameters ``θ*``. On a square grid of that plane, both the drift loss and
the sliced Wasserstein distance to the target are evaluated, which shows
whether low loss corresponds to good samples.

"""

from __future__ import annotations

import dataclasses
import logging
from collections.abc import Sequence
from typing import Any

import numpy as np

from .drift import multiscale_drift_field
from .exceptions import InsufficientData, InvalidParameter
from .generator import MlpGenerator, mlp_forward
from .kernels import KernelSpec
from .metrics import projection_directions, sliced_wasserstein
from .targets import ParticleSet, as_points
from .typing import Array, Seed
from .utils import spawn_seeds
from .workers import map_chunks


__all__ = [
    "PrincipalDirections",
    "LandscapeScan",
    "principal_directions",
    "landscape_loss",
    "landscape_scan",
]


logger = logging.getLogger(__name__)


# Relative threshold under which an eigenvalue of the gradient Gram matrix
# counts as zero.
RANK_TOLERANCE = 1e-12


@dataclasses.dataclass(frozen=True, eq=False)
class PrincipalDirections:
    """
    Two orthonormal directions in parameter space.

    Attributes:
        first: Leading principal direction.
        second: Second principal direction, or a random direction orthogonal
            to the first when the gradients don't span two dimensions.
        explained: Fraction of the gradient variance along each direction.
        degenerate: :obj:`True` when ``second`` was drawn at random.

    """

    first: Array
    second: Array
    explained: tuple[float, float]
    degenerate: bool


def _orthonormalize(vector: Array, basis: Sequence[Array]) -> Array:
    # Two passes of Gram-Schmidt keep orthogonality at machine precision.
    for _ in range(2):
        for other in basis:
            vector = vector - (vector @ other) * other
    return vector / np.linalg.norm(vector)


def principal_directions(
    snapshots: Sequence[Array],
    seed: Seed = 0,
) -> PrincipalDirections:
    """
    Leading principal directions of flattened gradients.

    The covariance is diagonalized through the small Gram matrix of the
    centered snapshots, which avoids forming a parameter-sized matrix.

    Raises:
        InsufficientData: If fewer than two snapshots are given.

    """
    if len(snapshots) < 2:
        raise InsufficientData("gradient snapshots", 2, len(snapshots))
    stacked = np.stack([np.asarray(s, dtype=np.float64) for s in snapshots])
    centered = stacked - stacked.mean(axis=0)
    eigenvalues, eigenvectors = np.linalg.eigh(centered @ centered.T)
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues = np.clip(eigenvalues[order], 0.0, None)
    eigenvectors = eigenvectors[:, order]
    total = float(eigenvalues.sum())
    rank = int(np.sum(eigenvalues > RANK_TOLERANCE * max(total, 1e-300)))

    rng = np.random.default_rng(seed)
    directions: list[Array] = []
    for index in range(min(rank, 2)):
        component = centered.T @ eigenvectors[:, index]
        directions.append(_orthonormalize(component, directions))
    degenerate = rank < 2
    while len(directions) < 2:
        random = rng.standard_normal(stacked.shape[1])
        directions.append(_orthonormalize(random, directions))
    if degenerate:
        logger.warning(
            "gradient snapshots have rank %d; completing with random directions",
            rank,
        )
    if total > 0:
        explained = (float(eigenvalues[0] / total), float(eigenvalues[1] / total))
    else:
        explained = (0.0, 0.0)
    return PrincipalDirections(directions[0], directions[1], explained, degenerate)


def landscape_loss(
    generator: MlpGenerator,
    noise: Array,
    p_samples: ParticleSet | Array,
    kernels: Sequence[KernelSpec],
    eta: float = 1.0,
) -> float:
    """
    Drift loss ``η² mean |V(x)|²`` of the generated points ``x = f(noise)``.

    """
    x = mlp_forward(generator, noise)
    y_p = as_points(p_samples, x.shape[1])
    drift = multiscale_drift_field(x, y_p, x, kernels).vectors
    return float(eta**2 * np.sum(drift**2) / len(x))


@dataclasses.dataclass(frozen=True, eq=False)
class LandscapeScan:
    """
    Loss and sample quality on a grid of the principal plane.

    Attributes:
        alphas: Offsets along the first direction.
        betas: Offsets along the second direction.
        loss: Drift loss, indexed by ``[alpha, beta]``.
        sliced_wasserstein: Distance to target samples, same indexing.
        directions: Directions spanning the plane.

    """

    alphas: Array
    betas: Array
    loss: Array
    sliced_wasserstein: Array
    directions: PrincipalDirections

    columns = ("alpha", "beta", "loss", "sliced_wasserstein")

    @property
    def center(self) -> tuple[int, int]:
        return len(self.alphas) // 2, len(self.betas) // 2

    def argmin_loss(self) -> tuple[int, int]:
        index = np.unravel_index(np.argmin(self.loss), self.loss.shape)
        return int(index[0]), int(index[1])

    def rows(self) -> list[tuple[float, float, float, float]]:
        return [
            (
                float(a),
                float(b),
                float(self.loss[i, j]),
                float(self.sliced_wasserstein[i, j]),
            )
            for i, a in enumerate(self.alphas)
            for j, b in enumerate(self.betas)
        ]

    def to_json(self) -> dict[str, Any]:
        i, j = self.argmin_loss()
        return {
            "grid_n": len(self.alphas),
            "half_width": float(self.alphas[-1]),
            "explained_variance": list(self.directions.explained),
            "degenerate": self.directions.degenerate,
            "argmin_loss": [float(self.alphas[i]), float(self.betas[j])],
            "loss_at_argmin": float(self.loss[i, j]),
            "sliced_wasserstein_at_argmin": float(self.sliced_wasserstein[i, j]),
        }


def landscape_scan(
    generator: MlpGenerator,
    gradient_snapshots: Sequence[Array],
    noise: Array,
    p_samples: ParticleSet | Array,
    reference: ParticleSet | Array,
    kernels: Sequence[KernelSpec],
    *,
    eta: float = 1.0,
    grid_half_width: float = 1.0,
    grid_n: int = 31,
    n_proj: int = 200,
    seed: Seed = 0,
) -> LandscapeScan:
    """
    Evaluate loss and sliced Wasserstein distance around a trained generator.

    Parameters are ``θ(α, β) = θ* + α d1 + β d2`` for ``α, β`` on a regular
    grid of ``[-grid_half_width, grid_half_width]``. The center node is the
    trained generator itself when ``grid_n`` is odd.

    Args:
        generator: Trained generator.
        gradient_snapshots: Flattened gradients recorded during training.
        noise: Noise fed to every generator on the grid.
        p_samples: Data samples of the drift.
        reference: Target samples compared with generated ones; must have as
            many rows as ``noise``.
        kernels: Kernels of the drift.
        eta: Step scale of the drift.
        grid_half_width: Half width of the grid, in parameter-space units.
        grid_n: Nodes per axis.
        n_proj: Projections of the sliced Wasserstein distance.
        seed: Seed of the fallback direction and of the projections.

    """
    if grid_n < 2:
        raise InvalidParameter("grid_n", grid_n, "must be at least 2")
    if not grid_half_width > 0:
        raise InvalidParameter("grid_half_width", grid_half_width, "must be > 0")
    direction_seed, projection_seed = spawn_seeds(seed, 2)
    directions = principal_directions(gradient_snapshots, direction_seed)
    if len(directions.first) != generator.n_parameters:
        raise InvalidParameter(
            "gradient_snapshots",
            len(directions.first),
            f"must have {generator.n_parameters} entries",
        )
    reference_points = as_points(reference, generator.out_dim)
    projections = projection_directions(n_proj, generator.out_dim, projection_seed)
    theta = generator.flatten()
    offsets = np.linspace(-grid_half_width, grid_half_width, grid_n)

    def evaluate(start: int, stop: int) -> tuple[Array, Array]:
        loss = np.empty((stop - start, grid_n))
        distance = np.empty((stop - start, grid_n))
        for row, alpha in enumerate(offsets[start:stop]):
            for col, beta in enumerate(offsets):
                moved = generator.with_flat(
                    theta + alpha * directions.first + beta * directions.second
                )
                loss[row, col] = landscape_loss(moved, noise, p_samples, kernels, eta)
                distance[row, col] = sliced_wasserstein(
                    mlp_forward(moved, noise), reference_points, directions=projections
                )
        return loss, distance

    results = map_chunks(evaluate, [(i, i + 1) for i in range(grid_n)])
    loss = np.concatenate([loss for loss, _ in results])
    distance = np.concatenate([distance for _, distance in results])
    logger.info(
        "scanned %d×%d grid; explained variance %.3f, %.3f",
        grid_n,
        grid_n,
        *directions.explained,
    )
    return LandscapeScan(offsets, offsets.copy(), loss, distance, directions)
