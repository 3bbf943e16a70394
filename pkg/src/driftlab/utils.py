from __future__ import annotations

import numpy as np

from .typing import Seed


__all__ = ["spawn_seeds", "draw_seed"]


def spawn_seeds(seed: Seed, n: int) -> list[np.random.SeedSequence]:
    """
    Derive ``n`` independent seed sequences from ``seed``.

    Each consumer of randomness in a computation gets its own stream, so
    adding draws to one stream never shifts another.

    Args:
        seed: Integer or seed sequence.
        n: Number of child sequences.

    """
    if isinstance(seed, np.random.SeedSequence):
        return seed.spawn(n)
    return np.random.SeedSequence(seed).spawn(n)


def draw_seed(rng: np.random.Generator) -> int:
    """
    Draw an integer seed from a generator.

    """
    return int(rng.integers(0, 2**63 - 1))
