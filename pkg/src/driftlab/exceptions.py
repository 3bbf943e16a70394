"""
:mod:`driftlab.exceptions` defines the following hierarchy of exceptions.

* :exc:`DriftlabError`
    * :exc:`UsageError`
        * :exc:`DimensionMismatch`
        * :exc:`ShapeMismatch`
        * :exc:`MisalignedGrids`
        * :exc:`UnequalSampleCounts`
        * :exc:`InsufficientData`
        * :exc:`InvalidParameter`
        * :exc:`UnsupportedBackend`
    * :exc:`ConfigError`
        * :exc:`ConfigParseError`
        * :exc:`InvalidConfigField`
    * :exc:`SchemaError`
    * :exc:`NumericalError`
        * :exc:`NonFiniteLoss`

Conditions that don't prevent a computation from producing a meaningful
result, such as probes far from the support of a sample set or a Sinkhorn
plan that didn't reach its tolerance, aren't exceptions. They're reported as
flags on the returned objects and logged.

"""

from __future__ import annotations


__all__ = [
    "DriftlabError",
    "UsageError",
    "DimensionMismatch",
    "ShapeMismatch",
    "MisalignedGrids",
    "UnequalSampleCounts",
    "InsufficientData",
    "InvalidParameter",
    "UnsupportedBackend",
    "ConfigError",
    "ConfigParseError",
    "InvalidConfigField",
    "SchemaError",
    "NumericalError",
    "NonFiniteLoss",
]


class DriftlabError(Exception):
    """
    Base class for all exceptions defined by driftlab.

    """


class UsageError(DriftlabError, ValueError):
    """
    Raised when a function receives arguments it cannot work with.

    """


class DimensionMismatch(UsageError):
    """
    Raised when points don't have the dimension that a computation expects.

    """

    def __init__(self, what: str, expected: int, actual: int) -> None:
        self.what = what
        self.expected = expected
        self.actual = actual

    def __str__(self) -> str:
        return f"{self.what} has dimension {self.actual}, expected {self.expected}"


class ShapeMismatch(UsageError):
    """
    Raised when two arrays that must have the same shape don't.

    """

    def __init__(
        self,
        what: str,
        expected: tuple[int, ...],
        actual: tuple[int, ...],
    ) -> None:
        self.what = what
        self.expected = expected
        self.actual = actual

    def __str__(self) -> str:
        return f"{self.what} has shape {self.actual}, expected {self.expected}"


class MisalignedGrids(UsageError):
    """
    Raised when two density grids don't share the same axes.

    """


class UnequalSampleCounts(UsageError):
    """
    Raised when a sorted-matching metric receives sets of different sizes.

    Subsample the larger set before calling the metric.

    """

    def __init__(self, n_x: int, n_y: int) -> None:
        self.n_x = n_x
        self.n_y = n_y

    def __str__(self) -> str:
        return f"sample counts differ: {self.n_x} != {self.n_y}"


class InsufficientData(UsageError):
    """
    Raised when too few valid values remain for a statistic to be defined.

    """

    def __init__(self, what: str, required: int, available: int) -> None:
        self.what = what
        self.required = required
        self.available = available

    def __str__(self) -> str:
        return (
            f"{self.what} requires at least {self.required} valid values, "
            f"got {self.available}"
        )


class InvalidParameter(UsageError):
    """
    Raised when a parameter violates its constraint.

    Attributes:
        name: Name of the parameter.
        value: Rejected value.
        constraint: Human-readable constraint, e.g. ``"must be positive"``.

    """

    def __init__(self, name: str, value: object, constraint: str) -> None:
        self.name = name
        self.value = value
        self.constraint = constraint

    def __str__(self) -> str:
        return f"{self.name} {self.constraint}, got {self.value!r}"


class UnsupportedBackend(UsageError):
    """
    Raised when a loss mode cannot be combined with a drift backend.

    Coupled training differentiates through the drift; only kernel drifts
    provide that derivative.

    """

    def __init__(self, loss_mode: str, backend: str) -> None:
        self.loss_mode = loss_mode
        self.backend = backend

    def __str__(self) -> str:
        return (
            f"{self.loss_mode} training isn't supported with the {self.backend} drift"
        )


class ConfigError(DriftlabError):
    """
    Base class for errors in experiment configuration files.

    """


class ConfigParseError(ConfigError):
    """
    Raised when a configuration file isn't valid TOML or JSON.

    """

    def __init__(
        self,
        path: str,
        msg: str,
        line: int | None = None,
        column: int | None = None,
    ) -> None:
        self.path = path
        self.msg = msg
        self.line = line
        self.column = column

    def __str__(self) -> str:
        if self.line is None:
            return f"{self.path}: {self.msg}"
        elif self.column is None:
            return f"{self.path}:{self.line}: {self.msg}"
        else:
            return f"{self.path}:{self.line}:{self.column}: {self.msg}"


class InvalidConfigField(ConfigError):
    """
    Raised when a configuration field is missing, unknown, or out of range.

    Attributes:
        field: Dotted path of the field, e.g. ``"verify_score.sigma"``.
        reason: Why the value was rejected.

    """

    def __init__(self, field: str, reason: str) -> None:
        self.field = field
        self.reason = reason

    def __str__(self) -> str:
        return f"invalid field {self.field}: {self.reason}"


class SchemaError(DriftlabError):
    """
    Raised when a CSV file doesn't have the columns a plot kind expects.

    """

    def __init__(self, path: str, msg: str) -> None:
        self.path = path
        self.msg = msg

    def __str__(self) -> str:
        return f"{self.path}: {self.msg}"


class NumericalError(DriftlabError, ArithmeticError):
    """
    Base class for numerical failures that abort a computation.

    """


class NonFiniteLoss(NumericalError):
    """
    Raised when training produces a NaN or infinite loss.

    Attributes:
        step: Training step at which the loss became non-finite.
        snapshot: Path of the checkpoint written before aborting, if any.

    """

    def __init__(self, step: int, loss: float, snapshot: str | None = None) -> None:
        self.step = step
        self.loss = loss
        self.snapshot = snapshot

    def __str__(self) -> str:
        message = f"loss became {self.loss} at step {self.step}"
        if self.snapshot is not None:
            message += f"; snapshot saved to {self.snapshot}"
        return message
