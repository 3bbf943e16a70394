from __future__ import annotations

import concurrent.futures
import os
from collections.abc import Sequence
from typing import Callable, TypeVar


__all__ = ["MAX_WORKERS", "CHUNK_SIZE", "chunk_bounds", "map_chunks", "run_all"]


T = TypeVar("T")


# Maximum number of threads used for data-parallel loops. NumPy releases the
# GIL in the heavy kernels, which makes threads worthwhile.
MAX_WORKERS = max(1, int(os.environ.get("DRIFTLAB_THREADS", os.cpu_count() or 1)))

# Maximum number of entries of a pairwise matrix evaluated at once. This caps
# memory at about 32 MiB per float64 matrix.
CHUNK_SIZE = int(os.environ.get("DRIFTLAB_CHUNK_SIZE", "4_194_304"))


def chunk_bounds(n_rows: int, row_cost: int) -> list[tuple[int, int]]:
    """
    Split ``range(n_rows)`` into contiguous chunks.

    Args:
        n_rows: Number of rows to split.
        row_cost: Number of matrix entries each row requires.

    Returns:
        ``(start, stop)`` pairs covering all rows in order.

    """
    rows_per_chunk = max(1, CHUNK_SIZE // max(1, row_cost))
    return [
        (start, min(start + rows_per_chunk, n_rows))
        for start in range(0, n_rows, rows_per_chunk)
    ]


def map_chunks(
    func: Callable[[int, int], T],
    bounds: Sequence[tuple[int, int]],
) -> list[T]:
    """
    Evaluate ``func(start, stop)`` for each chunk, possibly in parallel.

    Results are returned in the order of ``bounds`` regardless of completion
    order, so reductions over them are deterministic.

    """
    if MAX_WORKERS == 1 or len(bounds) <= 1:
        return [func(start, stop) for start, stop in bounds]
    workers = min(MAX_WORKERS, len(bounds))
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
        futures = [executor.submit(func, start, stop) for start, stop in bounds]
        return [future.result() for future in futures]


def run_all(funcs: Sequence[Callable[[], T]]) -> list[T]:
    """
    Run independent computations, concurrently when allowed.

    Results are returned in the order of ``funcs``.

    """
    if MAX_WORKERS == 1 or len(funcs) <= 1:
        return [func() for func in funcs]
    workers = min(MAX_WORKERS, len(funcs))
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
        futures = [executor.submit(func) for func in funcs]
        return [future.result() for future in futures]
