"""Worker-count policy and a deterministic chunked map."""

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np


def n_workers(requested=None):
    """Number of workers, capped by ``FRACMIN_THREADS`` when it is set."""
    cap = os.environ.get("FRACMIN_THREADS")
    n = requested if requested is not None else (os.cpu_count() or 1)
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise ValueError(f"FRACMIN_THREADS must be an integer, got {cap!r}") from None
    return max(1, int(n))


def chunked_map(fn, n_items, chunk=512, workers=None):
    """Apply ``fn(lo, hi)`` to fixed index chunks and concatenate in order.

    Chunk boundaries do not depend on the worker count, so results are
    bitwise identical whatever the parallelism.
    """
    bounds = [(lo, min(lo + chunk, n_items)) for lo in range(0, n_items, chunk)]
    if not bounds:
        return np.zeros(0)
    w = n_workers(workers)
    if w == 1 or len(bounds) == 1:
        parts = [fn(lo, hi) for lo, hi in bounds]
    else:
        with ThreadPoolExecutor(max_workers=w) as pool:
            parts = list(pool.map(lambda b: fn(*b), bounds))
    return np.concatenate(parts)
