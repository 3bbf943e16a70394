"""
Entropic optimal transport between uniform point clouds.

:func:`sinkhorn_plan` solves the entropic transport problem with squared
Euclidean cost by alternating updates of the dual potentials, all in log
scale. Small regularizations such as ``ε = 1e-4`` remain usable.

The Sinkhorn drift moves each generated point toward its barycentric
projection on the data, and away from its barycentric projection on the
generated points themselves::

    V(x_i) = T_{q→p}(x_i) - T_{q→q}(x_i)

"""

from __future__ import annotations

import dataclasses
import functools
import logging
import math
from typing import Any

import numpy as np
from scipy.special import logsumexp, softmax

from .drift import DriftField
from .exceptions import DimensionMismatch, InvalidParameter
from .targets import ParticleSet
from .typing import Array
from .workers import run_all


__all__ = [
    "SinkhornPlan",
    "SinkhornDivergence",
    "sinkhorn_plan",
    "entropic_ot_cost",
    "sinkhorn_divergence",
    "sinkhorn_divergence_gradient",
    "barycentric_projection",
    "sinkhorn_drift",
]


logger = logging.getLogger(__name__)


DEFAULT_MAX_ITER = 2000
DEFAULT_TOL = 1e-9

# A plan is flagged as unconverged when its residual exceeds the tolerance by
# more than this factor.
UNCONVERGED_FACTOR = 10.0

# Divergences smaller than this in absolute value are reported as 0.
DIVERGENCE_FLOOR = 1e-12


@dataclasses.dataclass(frozen=True, eq=False)
class SinkhornPlan:
    """
    Entropic coupling between two point clouds with uniform weights.

    The coupling is ``π_ij = exp((f_i + g_j - C_ij) / ε) / (n m)``.

    Attributes:
        source: Source points, ``n`` rows.
        target: Target points, ``m`` rows.
        epsilon: Entropic regularization.
        f: Dual potential on the source.
        g: Dual potential on the target.
        cost: Squared Euclidean costs, shape ``(n, m)``.
        iterations: Number of iterations performed.
        residual: ℓ1 error on the target marginal after the last iteration;
            the source marginal is exact by construction.
        converged: :obj:`False` if ``residual`` exceeds ten times the
            tolerance.

    """

    source: ParticleSet
    target: ParticleSet
    epsilon: float
    f: Array
    g: Array
    cost: Array
    iterations: int
    residual: float
    converged: bool

    @property
    def log_coupling(self) -> Array:
        n, m = self.cost.shape
        return (
            (self.f[:, None] + self.g[None, :] - self.cost) / self.epsilon
            - math.log(n)
            - math.log(m)
        )

    @property
    def coupling(self) -> Array:
        return np.exp(self.log_coupling)

    def marginal_errors(self) -> tuple[float, float]:
        """ℓ∞ errors on the row and column marginals."""
        n, m = self.cost.shape
        coupling = self.coupling
        rows = np.max(np.abs(coupling.sum(axis=1) - 1.0 / n))
        cols = np.max(np.abs(coupling.sum(axis=0) - 1.0 / m))
        return float(rows), float(cols)

    def to_json(self) -> dict[str, Any]:
        return {
            "epsilon": self.epsilon,
            "n": self.source.n,
            "m": self.target.n,
            "iterations": self.iterations,
            "residual": self.residual,
            "converged": self.converged,
            "cost": entropic_ot_cost(self),
        }


def _squared_distances(x: Array, y: Array) -> Array:
    return np.sum((x[:, None, :] - y[None, :, :]) ** 2, axis=-1)


def sinkhorn_plan(
    x: ParticleSet | Array,
    y: ParticleSet | Array,
    eps: float,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
) -> SinkhornPlan:
    """
    Solve the entropic transport problem from ``x`` to ``y``.

    Each iteration updates ``g`` to fit the target marginal, then ``f`` to
    fit the source marginal, using log-sum-exp reductions. Iterations stop
    when the ℓ1 error on the target marginal drops below ``tol``.

    A plan that doesn't converge within ``max_iter`` iterations is returned
    with :attr:`~SinkhornPlan.converged` set to :obj:`False`.

    Raises:
        InvalidParameter: If ``eps``, ``max_iter``, or ``tol`` isn't positive.

    """
    source = x if isinstance(x, ParticleSet) else ParticleSet(x)
    target = y if isinstance(y, ParticleSet) else ParticleSet(y)
    if target.dim != source.dim:
        raise DimensionMismatch("y", source.dim, target.dim)
    if not eps > 0:
        raise InvalidParameter("eps", eps, "must be positive")
    if max_iter < 1:
        raise InvalidParameter("max_iter", max_iter, "must be at least 1")
    if not tol > 0:
        raise InvalidParameter("tol", tol, "must be positive")

    cost = _squared_distances(source.points, target.points)
    n, m = cost.shape
    log_a = -math.log(n)
    log_b = -math.log(m)
    scaled = -cost / eps
    f = np.zeros(n)
    g = np.zeros(m)
    # -g / ε after the next update of g; also yields the column marginals.
    column_lse = logsumexp(log_a + scaled, axis=0)
    residual = math.inf
    iterations = 0
    for iterations in range(1, max_iter + 1):
        g = -eps * column_lse
        f = -eps * logsumexp(log_b + g[None, :] / eps + scaled, axis=1)
        column_lse = logsumexp(log_a + f[:, None] / eps + scaled, axis=0)
        columns = np.exp(log_b + g / eps + column_lse)
        residual = float(np.sum(np.abs(columns - 1.0 / m)))
        if residual < tol:
            break

    converged = residual <= UNCONVERGED_FACTOR * tol
    if not converged:
        logger.warning(
            "Sinkhorn didn't converge in %d iterations: residual %.3e, ε=%g",
            iterations,
            residual,
            eps,
        )
    return SinkhornPlan(
        source, target, eps, f, g, cost, iterations, residual, converged
    )


def entropic_ot_cost(plan: SinkhornPlan, method: str = "dual") -> float:
    """
    Entropic transport cost of a plan.

    Args:
        plan: Solved plan.
        method: ``"dual"`` evaluates ``mean f + mean g``. ``"primal"``
            evaluates ``Σ π C + ε KL(π ‖ a ⊗ b)`` in log scale. Both agree
            for a converged plan.

    """
    if not plan.converged:
        logger.warning("entropic cost of an unconverged plan")
    if method == "dual":
        return float(np.mean(plan.f) + np.mean(plan.g))
    elif method == "primal":
        n, m = plan.cost.shape
        log_coupling = plan.log_coupling
        coupling = np.exp(log_coupling)
        log_ratio = log_coupling + math.log(n) + math.log(m)
        transport = np.sum(coupling * plan.cost)
        entropy = np.sum(coupling * log_ratio) - np.sum(coupling) + 1.0
        return float(transport + plan.epsilon * entropy)
    else:
        raise InvalidParameter("method", method, "must be 'dual' or 'primal'")


@dataclasses.dataclass(frozen=True)
class SinkhornDivergence:
    """
    Debiased entropic transport cost.

    Attributes:
        value: ``OT(x, y) - OT(x, x) / 2 - OT(y, y) / 2``, nonnegative.
        converged: :obj:`False` if any of the three plans didn't converge.

    """

    value: float
    converged: bool

    def __float__(self) -> float:
        return self.value


def _solve(
    pairs: list[tuple[ParticleSet, ParticleSet]],
    eps: float,
    max_iter: int,
    tol: float,
) -> list[SinkhornPlan]:
    return run_all(
        [functools.partial(sinkhorn_plan, x, y, eps, max_iter, tol) for x, y in pairs]
    )


def sinkhorn_divergence(
    x: ParticleSet | Array,
    y: ParticleSet | Array,
    eps: float,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
) -> SinkhornDivergence:
    """
    Sinkhorn divergence between two point clouds.

    The divergence vanishes when ``x`` equals ``y``, is symmetric, and is
    nonnegative. Values within 1e-12 of 0 are reported as 0.

    """
    x = x if isinstance(x, ParticleSet) else ParticleSet(x)
    y = y if isinstance(y, ParticleSet) else ParticleSet(y)
    xy, xx, yy = _solve([(x, y), (x, x), (y, y)], eps, max_iter, tol)
    value = (
        entropic_ot_cost(xy) - 0.5 * entropic_ot_cost(xx) - 0.5 * entropic_ot_cost(yy)
    )
    if abs(value) < DIVERGENCE_FLOOR:
        value = 0.0
    converged = xy.converged and xx.converged and yy.converged
    return SinkhornDivergence(value, converged)


def barycentric_projection(plan: SinkhornPlan) -> ParticleSet:
    """
    Map each source point to the coupling-weighted mean of the target.

    """
    weights = softmax(plan.log_coupling, axis=1)
    assert np.all(weights.sum(axis=1) > 0)
    return ParticleSet(weights @ plan.target.points)


def sinkhorn_divergence_gradient(
    x: ParticleSet | Array,
    y: ParticleSet | Array,
    eps: float,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
) -> Array:
    """
    Gradient of the Sinkhorn divergence with respect to the points of ``x``.

    For squared Euclidean cost and uniform weights, the gradient at ``x_i``
    is ``(2/n) (T_{x→x}(x_i) - T_{x→y}(x_i))``.

    """
    x = x if isinstance(x, ParticleSet) else ParticleSet(x)
    y = y if isinstance(y, ParticleSet) else ParticleSet(y)
    xy, xx = _solve([(x, y), (x, x)], eps, max_iter, tol)
    to_y = barycentric_projection(xy).points
    to_x = barycentric_projection(xx).points
    return 2.0 / x.n * (to_x - to_y)


def sinkhorn_drift(
    x_gen: ParticleSet | Array,
    y_data: ParticleSet | Array,
    eps: float,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
    scale: float = 1.0,
) -> DriftField:
    """
    Sinkhorn drift ``scale (T_{q→p}(x_i) - T_{q→q}(x_i))`` at generated points.

    The plans from ``x_gen`` to ``y_data`` and from ``x_gen`` to itself are
    solved concurrently.

    """
    x = x_gen if isinstance(x_gen, ParticleSet) else ParticleSet(x_gen)
    y = y_data if isinstance(y_data, ParticleSet) else ParticleSet(y_data)
    to_data, to_self = _solve([(x, y), (x, x)], eps, max_iter, tol)
    vectors = scale * (
        barycentric_projection(to_data).points - barycentric_projection(to_self).points
    )
    converged = to_data.converged and to_self.converged
    return DriftField(x.points, vectors, converged=converged)
