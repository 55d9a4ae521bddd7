"""Thread-count configuration and the shared worker pools."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from functools import lru_cache

import numpy as np

_default_threads = os.cpu_count() or 1


def get_num_threads() -> int:
    return _default_threads


def set_num_threads(n: int) -> None:
    global _default_threads
    if n < 1:
        raise ValueError("thread count must be >= 1")
    _default_threads = int(n)


def resolve_threads(threads: int | None) -> int:
    t = get_num_threads() if threads is None else int(threads)
    if t < 1:
        raise ValueError("thread count must be >= 1")
    return t


@lru_cache(maxsize=None)
def executor(threads: int) -> ThreadPoolExecutor:
    return ThreadPoolExecutor(max_workers=threads, thread_name_prefix=f"asmsp{threads}")


def chunks(rows: np.ndarray, threads: int) -> list[np.ndarray]:
    """Split ``rows`` into at most ``threads`` contiguous nonempty pieces."""
    k = max(1, min(threads, rows.size))
    return [c for c in np.array_split(rows, k) if c.size]


def run_chunked(kernel, rows: np.ndarray, threads: int, *args) -> None:
    """Call ``kernel(*args, chunk)`` for every chunk of ``rows`` and wait.

    The kernels must write disjoint entries per chunk; the barrier at the end
    separates consecutive calls.
    """
    if threads == 1 or rows.size < 2:
        kernel(*args, rows)
        return
    futures = [executor(threads).submit(kernel, *args, c) for c in chunks(rows, threads)]
    for f in futures:
        f.result()
