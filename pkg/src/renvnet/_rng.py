"""Seeded counter-based substreams.

Work is cut into fixed-size blocks; block ``b`` of a run seeded with ``s``
always draws from the Philox stream keyed by ``(s, b)``.  Results depend on
the block layout only, never on how blocks are spread over workers.
"""
from concurrent.futures import ThreadPoolExecutor

import numpy as np

BLOCK_SIZE = 1 << 14


def substream(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def blocks(total: int, size: int = BLOCK_SIZE):
    """Yield ``(block_index, count)`` covering ``total`` items."""
    b = 0
    start = 0
    while start < total:
        n = min(size, total - start)
        yield b, n
        b += 1
        start += n


def map_blocks(fn, total: int, workers: int = 1, size: int = BLOCK_SIZE):
    """Apply ``fn(block_index, count)`` to every block; results in block order."""
    layout = list(blocks(total, size))
    if workers <= 1 or len(layout) <= 1:
        return [fn(b, n) for b, n in layout]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda bn: fn(*bn), layout))
