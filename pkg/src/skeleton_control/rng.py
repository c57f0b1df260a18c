"""Counter-based random streams with explicit substream ids.

All sampling in this package goes through Philox (a counter-based generator),
keyed by (seed, stream id).  Distinct stream ids give statistically independent
streams, so path blocks can in principle be generated concurrently while
staying bit-identical for a fixed seed.
"""
from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1

# Paths are assigned to substreams in contiguous blocks of this size; bulk
# samplers draw one block per stream in a fixed order.
BLOCK_SIZE = 4096


def substream(seed: int, stream: int = 0) -> np.random.Generator:
    """Generator for the given (seed, stream id) pair."""
    key = np.array([int(seed) & _MASK64, int(stream) & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def as_generator(rng) -> np.random.Generator:
    """Accept a Generator or an integer seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    return substream(int(rng))


def n_blocks(n_paths: int) -> int:
    return (n_paths + BLOCK_SIZE - 1) // BLOCK_SIZE
