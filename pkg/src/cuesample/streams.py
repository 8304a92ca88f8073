"""Deterministic per-work-item random streams.

Every trial (and every estimator call inside a trial) gets its own generator
derived from the run seed plus an integer key path. Results therefore do not
depend on the order in which work items run or on how many workers run them.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")


def stream(seed: int, *key: int) -> np.random.Generator:
    """Generator for work item ``key`` under ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def chunked(n: int, size: int) -> list[range]:
    return [range(lo, min(lo + size, n)) for lo in range(0, n, size)]


def parallel_map(fn: Callable[[T], R], items: Sequence[T] | Iterable[T], jobs: int = 1) -> list[R]:
    """``[fn(item) for item in items]``, optionally across ``jobs`` processes.

    Output order always matches input order. ``fn`` must be picklable.
    """
    items = list(items)
    if jobs < 1:
        raise ValueError(f"jobs must be >= 1, got {jobs}")
    if jobs == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as pool:
        return list(pool.map(fn, items))
