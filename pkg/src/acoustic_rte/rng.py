"""Counter-based random streams, one per particle.

Stream ``i`` of a run with master ``seed`` is the Philox-4x32-10 sequence
keyed by the seed with counter ``(block, i)``.  Every draw of a particle
consumes one block (two doubles), so a particle's random numbers depend only
on ``(seed, i, draw index)`` and never on how particles are grouped into
batches or workers.
"""
from __future__ import annotations

import numpy as np

from . import _kernels

__all__ = ["ParticleStreams", "child_stream_id", "SEED_MASK"]

SEED_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def child_stream_id(parent, j):
    """Stream id of the ``j``-th split copy of a particle (SplitMix64 finaliser)."""
    z = (np.asarray(parent, dtype=np.uint64) ^ np.uint64((_GOLDEN * (int(j) + 1)) & SEED_MASK))
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


class ParticleStreams:
    """Uniform draws for a population of independent particle streams."""

    def __init__(self, seed: int):
        if int(seed) < 0 or int(seed) > SEED_MASK:
            raise ValueError("seed must be an unsigned 64-bit integer")
        self.seed = int(seed)

    def pairs(self, ids, blocks):
        """``(N, 2)`` uniforms in ``(0, 1)``; advances ``blocks`` in place."""
        u = _kernels.uniform_pairs(self.seed, ids, blocks)
        blocks += np.uint64(1)
        return u

    def pairs_at(self, ids, blocks, sel):
        """Draw for the subset ``sel`` (index array) and advance only their counters."""
        u = _kernels.uniform_pairs(self.seed, ids[sel], blocks[sel])
        blocks[sel] += np.uint64(1)
        return u
