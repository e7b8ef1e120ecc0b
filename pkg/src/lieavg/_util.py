"""Small shared helpers: deterministic low-discrepancy sampling, worker pool."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, Sequence

_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19)


def _van_der_corput(index: int, base: int) -> float:
    v, denom = 0.0, 1.0
    while index > 0:
        index, rem = divmod(index, base)
        denom *= base
        v += rem / denom
    return v


def halton_points(count: int, lower: Sequence[float], upper: Sequence[float]):
    """``count`` Halton points inside the box [lower, upper], deterministic."""
    ndim = len(lower)
    if ndim > len(_PRIMES):
        raise ValueError(f"halton sampling supports up to {len(_PRIMES)} dimensions")
    pts = []
    for i in range(1, count + 1):
        pts.append(
            tuple(
                lower[d] + (upper[d] - lower[d]) * _van_der_corput(i, _PRIMES[d])
                for d in range(ndim)
            )
        )
    return pts


def worker_count() -> int:
    """Worker cap from LIEAVG_THREADS (default 1: fully serial)."""
    raw = os.environ.get("LIEAVG_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def parallel_map(fn: Callable, items: Iterable) -> list:
    """Map preserving input order; uses processes only when LIEAVG_THREADS > 1."""
    items = list(items)
    workers = worker_count()
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))
