"""Seeding.

Replica ``i`` of an ensemble with master seed ``s`` draws from
``PCG64(SeedSequence(s, spawn_key=(i,)))``; the mapping is a pure function of
``(s, i)``, so replicas can be run in any order or in parallel.
"""
from __future__ import annotations

import numpy as np

MAX_SEED = 2**64 - 1


def check_seed(seed) -> int:
    seed = int(seed)
    if not 0 <= seed <= MAX_SEED:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def replica_seed_sequence(master_seed: int, replica: int | None = None) -> np.random.SeedSequence:
    master_seed = check_seed(master_seed)
    if replica is None:
        return np.random.SeedSequence(master_seed)
    return np.random.SeedSequence(master_seed, spawn_key=(int(replica),))


def make_rng(master_seed: int, replica: int | None = None) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(replica_seed_sequence(master_seed, replica)))


class UniformStream:
    """Buffered uniform draws consumed in rows of fixed width.

    The simulation kernels take the buffer and a cursor and hand back the
    advanced cursor, so the sequence of draws a run consumes does not depend
    on how the run is split into chunks.
    """

    def __init__(self, rng: np.random.Generator, width: int, block: int = 1 << 16):
        self.rng = rng
        self.width = width
        self.block = block
        self.buf = np.empty((0, width))
        self.pos = 0

    def ensure(self, rows: int) -> None:
        """Make at least ``rows`` unconsumed rows available."""
        left = self.buf.shape[0] - self.pos
        if left >= rows:
            return
        need = max(rows - left, self.block)
        fresh = self.rng.random((need, self.width))
        self.buf = np.concatenate([self.buf[self.pos:], fresh])
        self.pos = 0
