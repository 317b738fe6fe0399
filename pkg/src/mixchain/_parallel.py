"""Thread fan-out with a deterministic result order."""

import os
from concurrent.futures import ThreadPoolExecutor


def max_workers() -> int:
    env = os.environ.get("MIXCHAIN_THREADS")
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def parallel_map(fn, items):
    items = list(items)
    workers = min(max_workers(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
