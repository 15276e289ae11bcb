"""Pure-numpy implementations of the compiled kernels (bit-identical results)."""
from __future__ import annotations

import numpy as np

M0 = np.uint64(0xD2511F53)
M1 = np.uint64(0xCD9E8D57)
W0 = np.uint32(0x9E3779B9)
W1 = np.uint32(0xBB67AE85)
MASK = np.uint64(0xFFFFFFFF)
SHIFT = np.uint64(32)


def philox4x32(ctr, key, rounds=10):
    """Philox-4x32 block function; ``ctr`` is ``(N, 4)`` uint32, ``key`` ``(2,)`` or ``(N, 2)``."""
    c = np.array(ctr, dtype=np.uint32, copy=True)
    k = np.broadcast_to(np.asarray(key, dtype=np.uint32), (c.shape[0], 2)).copy()
    c0, c1, c2, c3 = (c[:, i].astype(np.uint64) for i in range(4))
    k0 = k[:, 0].astype(np.uint64)
    k1 = k[:, 1].astype(np.uint64)
    for r in range(rounds):
        p0 = M0 * c0
        p1 = M1 * c2
        hi0, lo0 = p0 >> SHIFT, p0 & MASK
        hi1, lo1 = p1 >> SHIFT, p1 & MASK
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
        if r < rounds - 1:
            k0 = (k0 + np.uint64(W0)) & MASK
            k1 = (k1 + np.uint64(W1)) & MASK
    return np.stack([c0, c1, c2, c3], axis=1).astype(np.uint32)


def uniform_pairs(seed, ids, blocks):
    """Two doubles in ``(0, 1)`` per stream from block ``blocks[i]`` of stream ``ids[i]``.

    The counter is ``(block_lo, block_hi, id_lo, id_hi)`` and the key is the
    64-bit ``seed`` split into two words; each double takes 53 bits of a
    64-bit word, offset by half an ulp so neither 0 nor 1 is produced.
    """
    ids = np.asarray(ids, dtype=np.uint64)
    blocks = np.asarray(blocks, dtype=np.uint64)
    n = ids.shape[0]
    ctr = np.empty((n, 4), dtype=np.uint32)
    ctr[:, 0] = (blocks & MASK).astype(np.uint32)
    ctr[:, 1] = (blocks >> SHIFT).astype(np.uint32)
    ctr[:, 2] = (ids & MASK).astype(np.uint32)
    ctr[:, 3] = (ids >> SHIFT).astype(np.uint32)
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    key = np.array([seed & 0xFFFFFFFF, seed >> 32], dtype=np.uint32)
    out = philox4x32(ctr, key).astype(np.uint64)
    w0 = (out[:, 0] << SHIFT) | out[:, 1]
    w1 = (out[:, 2] << SHIFT) | out[:, 3]
    u = np.empty((n, 2))
    scale = 2.0 ** -53
    u[:, 0] = ((w0 >> np.uint64(11)).astype(np.float64) + 0.5) * scale
    u[:, 1] = ((w1 >> np.uint64(11)).astype(np.float64) + 0.5) * scale
    return u


def accumulate(index, weights, size):
    """Weighted counts of ``index`` in ``[0, size)``, summed in input order."""
    return np.bincount(np.asarray(index, dtype=np.intp), weights=np.asarray(weights, float),
                       minlength=size)[:size]
