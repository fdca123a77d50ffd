"""Counter-based random substreams for reproducible parallel Monte Carlo.

Every worker w of a run keyed by `seed` gets Philox(key=[seed, w]); sample
budgets are split into fixed contiguous chunks.  Results are therefore
bit-reproducible for a fixed (seed, workers) pair, regardless of how the
chunks are scheduled.
"""
from __future__ import annotations

import os

from numpy.random import Generator, Philox

_MASK64 = (1 << 64) - 1


def worker_generator(seed: int, worker: int) -> Generator:
    return Generator(Philox(key=[int(seed) & _MASK64, int(worker) & _MASK64]))


def chunk_bounds(total: int, workers: int) -> list[tuple[int, int]]:
    """Contiguous per-worker (start, stop) chunks covering range(total)."""
    if total < 0 or workers < 1:
        raise ValueError("need total >= 0 and workers >= 1")
    base, extra = divmod(total, workers)
    bounds = []
    start = 0
    for w in range(workers):
        size = base + (1 if w < extra else 0)
        bounds.append((start, start + size))
        start += size
    return bounds


def default_workers() -> int:
    env = os.environ.get("NOISESPECTRA_THREADS", "")
    if env.strip():
        return max(1, int(env))
    return 1
