from __future__ import annotations

import logging
import typing
from typing import Any, Union

import numpy as np
import numpy.typing as npt


__all__ = [
    "Array",
    "BoolArray",
    "LoggerLike",
    "Seed",
]


# Public types used in the signature of public APIs

Array = npt.NDArray[np.float64]
"""Array of double precision floats; every numeric result uses this dtype."""

BoolArray = npt.NDArray[np.bool_]
"""Boolean mask, e.g. flags attached to probes."""

Seed = Union[int, np.random.SeedSequence]
"""Accepted wherever a random stream is derived: an integer or a seed sequence."""


# Change to logging.Logger | ... when dropping Python < 3.10.
if typing.TYPE_CHECKING:
    LoggerLike = Union[logging.Logger, logging.LoggerAdapter[Any]]
    """Types accepted where a :class:`~logging.Logger` is expected."""
else:  # remove this branch when dropping support for Python < 3.11
    LoggerLike = Union[logging.Logger, logging.LoggerAdapter]
    """Types accepted where a :class:`~logging.Logger` is expected."""
