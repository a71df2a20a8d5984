"""Bounded thread pool used by the sweeps.

The heavy kernels are compiled with ``nogil`` so threads give real
parallelism.  Results always come back in input order, which keeps every
aggregate independent of the worker count.
"""
import os
from concurrent.futures import ThreadPoolExecutor

ENV_THREADS = "GHOST_SCALER_THREADS"


def resolve_workers(workers=None) -> int:
    if workers is None:
        env = os.environ.get(ENV_THREADS)
        if env:
            workers = int(env)
        else:
            workers = os.cpu_count() or 1
    workers = int(workers)
    if workers < 1:
        raise ValueError("worker count must be >= 1, got %d" % workers)
    return workers


def parallel_map(fn, items, workers=None) -> list:
    items = list(items)
    n = min(resolve_workers(workers), max(len(items), 1))
    if n == 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
