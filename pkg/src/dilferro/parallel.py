"""Worker-pool helper for embarrassingly parallel disorder samples.

Results are always collected in ascending sample-index order, so output is
independent of the worker count; all randomness lives in per-sample streams.
The worker count defaults to ``DFL_THREADS`` when set, else the available
parallelism.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor


def default_workers() -> int:
    env = os.environ.get("DFL_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def pmap(fn, items, n_jobs: int | None = None) -> list:
    """Map preserving order; runs inline when a single worker suffices."""
    items = list(items)
    if n_jobs is None:
        n_jobs = default_workers()
    n_jobs = min(max(1, n_jobs), len(items)) if items else 1
    if n_jobs == 1 or len(items) <= 1:
        return [fn(it) for it in items]
    chunk = max(1, len(items) // (4 * n_jobs))
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(fn, items, chunksize=chunk))
