"""Small shared utilities."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def thread_count() -> int:
    """Parallelism cap from RENORMLAB_THREADS (default 1: serial, deterministic)."""
    raw = os.environ.get("RENORMLAB_THREADS", "").strip()
    if not raw:
        return 1
    n = int(raw)
    if n < 1:
        raise ValueError("RENORMLAB_THREADS must be a positive integer")
    return n


def parallel_map(fn, items):
    """Order-preserving map, threaded when RENORMLAB_THREADS allows it.

    Results are identical to the serial map regardless of thread count; only
    pure functions are passed here.
    """
    n = thread_count()
    if n <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))
