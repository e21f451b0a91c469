"""Chunked, order-preserving data parallelism.

Work is always cut into fixed-size chunks independent of the thread count,
and results are concatenated in chunk order, so outputs are bit-identical
for any degree of parallelism.
"""
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

_THREADS = None


def default_threads():
    env = os.environ.get("DOMLAB_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def set_threads(n):
    global _THREADS
    _THREADS = None if n is None else max(1, int(n))


def get_threads():
    return _THREADS if _THREADS is not None else default_threads()


def map_chunks(fn, X, chunk=1024, threads=None):
    """Apply ``fn`` to row chunks of ``X``; each result is a tuple of arrays
    (or a single array) concatenated along axis 0."""
    n = len(X)
    pieces = [X[i : i + chunk] for i in range(0, n, chunk)] or [X]
    threads = threads or get_threads()
    if threads == 1 or len(pieces) == 1:
        results = [fn(p) for p in pieces]
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(fn, pieces))
    if isinstance(results[0], tuple):
        return tuple(np.concatenate(parts, axis=0) for parts in zip(*results))
    return np.concatenate(results, axis=0)
