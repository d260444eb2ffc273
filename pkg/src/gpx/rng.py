"""Counter-based random streams for reproducible, scheduling-independent runs.

Replicates are split into blocks whose size depends only on the problem
shape.  Block ``b`` of stream ``s`` under master seed ``seed`` draws from a
Philox generator keyed by ``(seed, s)`` with its counter started at ``b``, so
any block can be regenerated in isolation and a run gives bit-identical
output whatever the number of worker threads.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from functools import lru_cache

import numpy as np

__all__ = ["block_generator", "block_size", "resolve_threads", "run_blocks", "seed_from_env"]

# Doubles materialized per block; bounds memory, not results.
BLOCK_BUDGET = 1 << 21
MAX_BLOCK = 4096


@lru_cache(maxsize=256)
def _key(seed: int, stream: int) -> tuple[int, int]:
    if seed < 0:
        raise ValueError("seed must be a non-negative integer")
    state = np.random.SeedSequence([int(seed), int(stream)]).generate_state(2, np.uint64)
    return int(state[0]), int(state[1])


def block_generator(seed: int, block: int, stream: int = 0) -> np.random.Generator:
    """Generator for one replicate block; depends only on its three arguments."""
    key = np.array(_key(int(seed), int(stream)), dtype=np.uint64)
    counter = np.array([0, 0, int(block), 0], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(counter=counter, key=key))


def block_size(cost_per_replicate: int) -> int:
    """Replicates per block for a given per-replicate array footprint."""
    return int(max(1, min(MAX_BLOCK, BLOCK_BUDGET // max(1, int(cost_per_replicate)))))


def resolve_threads(threads: int | None) -> int:
    if threads is None:
        return os.cpu_count() or 1
    if threads < 1:
        raise ValueError("threads must be >= 1")
    return int(threads)


def run_blocks(func, n_blocks: int, threads: int | None = None) -> list:
    """Evaluate ``func(b)`` for every block index and return results in block order."""
    workers = min(resolve_threads(threads), max(1, n_blocks))
    if workers == 1:
        return [func(b) for b in range(n_blocks)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, range(n_blocks)))


def seed_from_env(default: int | None = None) -> int | None:
    """Seed from ``GPX_SEED`` when set, else ``default``."""
    raw = os.environ.get("GPX_SEED")
    if raw is None or raw.strip() == "":
        return default
    return int(raw)
