"""
Three-layer perceptron generator with explicit backpropagation and Adam.

The generator maps noise ``z`` of dimension ``k`` to samples of dimension
``d`` through two hidden layers with rectified linear units::

    h1 = relu(z W1 + b1)
    h2 = relu(h1 W2 + b2)
    x  = h2 W3 + b3

Rows are samples. Gradients are returned as :class:`MlpGenerator` instances
holding the derivative with respect to each parameter.

"""

from __future__ import annotations

import dataclasses
import math
from collections.abc import Iterator
from typing import Any

import numpy as np

from .exceptions import DimensionMismatch, InvalidParameter, ShapeMismatch
from .typing import Array, Seed


__all__ = [
    "MlpGenerator",
    "ForwardCache",
    "AdamState",
    "mlp_forward",
    "mlp_forward_cache",
    "mlp_backward",
    "adam_step",
]


PARAMETER_NAMES = ("w1", "b1", "w2", "b2", "w3", "b3")


@dataclasses.dataclass(frozen=True, eq=False)
class MlpGenerator:
    """
    Parameters of a generator ``k → hidden → hidden → d``.

    Attributes:
        w1: Weights of shape ``(k, hidden)``.
        b1: Biases of shape ``(hidden,)``.
        w2: Weights of shape ``(hidden, hidden)``.
        b2: Biases of shape ``(hidden,)``.
        w3: Weights of shape ``(hidden, d)``.
        b3: Biases of shape ``(d,)``.

    """

    w1: Array
    b1: Array
    w2: Array
    b2: Array
    w3: Array
    b3: Array

    def __post_init__(self) -> None:
        k, hidden = self.w1.shape
        d = self.w3.shape[1]
        expected = {
            "b1": (hidden,),
            "w2": (hidden, hidden),
            "b2": (hidden,),
            "w3": (hidden, d),
            "b3": (d,),
        }
        for name, shape in expected.items():
            actual = getattr(self, name).shape
            if actual != shape:
                raise ShapeMismatch(name, shape, actual)

    @property
    def noise_dim(self) -> int:
        return int(self.w1.shape[0])

    @property
    def hidden(self) -> int:
        return int(self.w1.shape[1])

    @property
    def out_dim(self) -> int:
        return int(self.w3.shape[1])

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.noise_dim, self.hidden, self.out_dim

    @property
    def n_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def parameters(self) -> Iterator[Array]:
        for name in PARAMETER_NAMES:
            yield getattr(self, name)

    @classmethod
    def init(
        cls,
        noise_dim: int,
        hidden: int,
        out_dim: int,
        seed: Seed,
    ) -> MlpGenerator:
        """
        Draw He-normal weights; biases start at zero.

        """
        for name, value in [
            ("noise_dim", noise_dim),
            ("hidden", hidden),
            ("out_dim", out_dim),
        ]:
            if value < 1:
                raise InvalidParameter(name, value, "must be at least 1")
        rng = np.random.default_rng(seed)

        def he(fan_in: int, fan_out: int) -> Array:
            return rng.standard_normal((fan_in, fan_out)) * math.sqrt(2.0 / fan_in)

        return cls(
            w1=he(noise_dim, hidden),
            b1=np.zeros(hidden),
            w2=he(hidden, hidden),
            b2=np.zeros(hidden),
            w3=he(hidden, out_dim),
            b3=np.zeros(out_dim),
        )

    @classmethod
    def zeros(cls, noise_dim: int, hidden: int, out_dim: int) -> MlpGenerator:
        return cls(
            w1=np.zeros((noise_dim, hidden)),
            b1=np.zeros(hidden),
            w2=np.zeros((hidden, hidden)),
            b2=np.zeros(hidden),
            w3=np.zeros((hidden, out_dim)),
            b3=np.zeros(out_dim),
        )

    def flatten(self) -> Array:
        """Concatenate all parameters into a vector."""
        return np.concatenate([p.reshape(-1) for p in self.parameters()])

    def with_flat(self, vector: Array) -> MlpGenerator:
        """
        Build a generator with the same architecture from a flat vector.

        Raises:
            ShapeMismatch: If ``vector`` has the wrong length.

        """
        vector = np.asarray(vector, dtype=np.float64)
        if vector.shape != (self.n_parameters,):
            raise ShapeMismatch("vector", (self.n_parameters,), vector.shape)
        values: dict[str, Any] = {}
        offset = 0
        for name in PARAMETER_NAMES:
            shape = getattr(self, name).shape
            size = int(np.prod(shape))
            values[name] = vector[offset : offset + size].reshape(shape).copy()
            offset += size
        return MlpGenerator(**values)

    def is_finite(self) -> bool:
        return all(bool(np.all(np.isfinite(p))) for p in self.parameters())


@dataclasses.dataclass(frozen=True, eq=False)
class ForwardCache:
    """
    Activations kept by :func:`mlp_forward_cache` for the backward pass.

    """

    z: Array
    h1: Array
    h2: Array
    output: Array


def _check_noise(g: MlpGenerator, z: Array) -> Array:
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    if z.shape[1] != g.noise_dim:
        raise DimensionMismatch("z", g.noise_dim, z.shape[1])
    return z


def mlp_forward_cache(g: MlpGenerator, z: Array) -> ForwardCache:
    z = _check_noise(g, z)
    h1 = np.maximum(z @ g.w1 + g.b1, 0.0)
    h2 = np.maximum(h1 @ g.w2 + g.b2, 0.0)
    return ForwardCache(z, h1, h2, h2 @ g.w3 + g.b3)


def mlp_forward(g: MlpGenerator, z: Array) -> Array:
    """
    Map a batch of noise vectors to samples.

    Raises:
        DimensionMismatch: If ``z`` doesn't have ``noise_dim`` columns.

    """
    return mlp_forward_cache(g, z).output


def mlp_backward(
    g: MlpGenerator,
    cache: ForwardCache,
    grad_output: Array,
) -> MlpGenerator:
    """
    Backpropagate ``grad_output``, the derivative of a scalar loss with
    respect to the outputs, to every parameter.

    The derivative of the rectifier at 0 is taken to be 0.

    """
    if grad_output.shape != cache.output.shape:
        raise ShapeMismatch("grad_output", cache.output.shape, grad_output.shape)
    grad_w3 = cache.h2.T @ grad_output
    grad_b3 = grad_output.sum(axis=0)
    grad_h2 = (grad_output @ g.w3.T) * (cache.h2 > 0)
    grad_w2 = cache.h1.T @ grad_h2
    grad_b2 = grad_h2.sum(axis=0)
    grad_h1 = (grad_h2 @ g.w2.T) * (cache.h1 > 0)
    grad_w1 = cache.z.T @ grad_h1
    grad_b1 = grad_h1.sum(axis=0)
    return MlpGenerator(grad_w1, grad_b1, grad_w2, grad_b2, grad_w3, grad_b3)


@dataclasses.dataclass(frozen=True, eq=False)
class AdamState:
    """
    First and second moment estimates of Adam, over flattened parameters.

    """

    m: Array
    v: Array
    step: int = 0

    @classmethod
    def zeros(cls, g: MlpGenerator) -> AdamState:
        return cls(np.zeros(g.n_parameters), np.zeros(g.n_parameters))


def adam_step(
    params: MlpGenerator,
    grads: MlpGenerator,
    state: AdamState,
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> tuple[MlpGenerator, AdamState]:
    """
    Apply one bias-corrected Adam update.

    Returns:
        Updated parameters and optimizer state; inputs aren't modified.

    """
    if not lr > 0:
        raise InvalidParameter("lr", lr, "must be positive")
    if not (0 <= beta1 < 1 and 0 <= beta2 < 1):
        raise InvalidParameter("beta", (beta1, beta2), "must be in [0, 1)")
    g = grads.flatten()
    step = state.step + 1
    m = beta1 * state.m + (1.0 - beta1) * g
    v = beta2 * state.v + (1.0 - beta2) * g * g
    m_hat = m / (1.0 - beta1**step)
    v_hat = v / (1.0 - beta2**step)
    theta = params.flatten() - lr * m_hat / (np.sqrt(v_hat) + eps)
    return params.with_flat(theta), AdamState(m, v, step)
