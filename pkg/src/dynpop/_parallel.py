"""Worker-pool helper; DYNPOP_THREADS caps parallelism (default: all cores)."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def worker_count() -> int:
    env = os.environ.get("DYNPOP_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_parallel(fn, items: list):
    """Map fn over items, preserving order; threads share immutable specs."""
    items = list(items)
    n = min(worker_count(), len(items))
    if n <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
