"""Seed-deterministic chunked execution.

Work is split into chunks whose sizes and child seeds depend only on the
total size and the parent generator, never on the worker count, so results
are bit-identical for any ``SOHB_THREADS``.
"""

import os
from concurrent.futures import ThreadPoolExecutor

CHUNK = 1 << 16


def n_threads():
    try:
        return max(1, int(os.environ.get("SOHB_THREADS", "1")))
    except ValueError:
        return 1


def chunk_sizes(total, chunk=CHUNK):
    total = int(total)
    sizes = [chunk] * (total // chunk)
    if total % chunk:
        sizes.append(total % chunk)
    return sizes


def chunked_map(func, rng, total, chunk=CHUNK):
    """Apply ``func(child_rng, size)`` over chunks; results in chunk order."""
    sizes = chunk_sizes(total, chunk)
    children = rng.spawn(len(sizes))
    workers = min(n_threads(), len(sizes))
    if workers <= 1:
        return [func(r, m) for r, m in zip(children, sizes)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, children, sizes))
