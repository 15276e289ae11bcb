# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Philox-4x32 stream generator and weighted binning."""
import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint32_t, uint64_t

cnp.import_array()

cdef uint64_t M0 = 0xD2511F53
cdef uint64_t M1 = 0xCD9E8D57
cdef uint32_t W0 = 0x9E3779B9
cdef uint32_t W1 = 0xBB67AE85
cdef uint64_t LO32 = 0xFFFFFFFF


cdef inline void _philox(uint32_t* c, uint32_t k0, uint32_t k1, int rounds) noexcept nogil:
    cdef uint64_t p0, p1
    cdef uint32_t c0 = c[0], c1 = c[1], c2 = c[2], c3 = c[3]
    cdef int r
    for r in range(rounds):
        p0 = M0 * <uint64_t>c0
        p1 = M1 * <uint64_t>c2
        c0, c1, c2, c3 = <uint32_t>(p1 >> 32) ^ c1 ^ k0, <uint32_t>p1, <uint32_t>(p0 >> 32) ^ c3 ^ k1, <uint32_t>p0
        if r < rounds - 1:
            k0 = k0 + W0
            k1 = k1 + W1
    c[0] = c0
    c[1] = c1
    c[2] = c2
    c[3] = c3


def philox4x32(ctr, key, int rounds=10):
    cdef cnp.ndarray[cnp.uint32_t, ndim=2] c = np.array(ctr, dtype=np.uint32, copy=True, order="C")
    cdef cnp.ndarray[cnp.uint32_t, ndim=2] k = np.ascontiguousarray(
        np.broadcast_to(np.asarray(key, dtype=np.uint32), (c.shape[0], 2)))
    cdef Py_ssize_t i, n = c.shape[0]
    with nogil:
        for i in range(n):
            _philox(&c[i, 0], k[i, 0], k[i, 1], rounds)
    return c


def uniform_pairs(seed, ids, blocks):
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] idv = np.ascontiguousarray(ids, dtype=np.uint64)
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] blk = np.ascontiguousarray(blocks, dtype=np.uint64)
    cdef Py_ssize_t i, n = idv.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] u = np.empty((n, 2))
    cdef uint64_t s = int(seed) & 0xFFFFFFFFFFFFFFFF
    cdef uint32_t k0 = <uint32_t>(s & LO32)
    cdef uint32_t k1 = <uint32_t>(s >> 32)
    cdef uint32_t c[4]
    cdef uint64_t w0, w1
    cdef double scale = 1.1102230246251565e-16  # 2**-53
    with nogil:
        for i in range(n):
            c[0] = <uint32_t>(blk[i] & LO32)
            c[1] = <uint32_t>(blk[i] >> 32)
            c[2] = <uint32_t>(idv[i] & LO32)
            c[3] = <uint32_t>(idv[i] >> 32)
            _philox(c, k0, k1, 10)
            w0 = (<uint64_t>c[0] << 32) | c[1]
            w1 = (<uint64_t>c[2] << 32) | c[3]
            u[i, 0] = (<double>(w0 >> 11) + 0.5) * scale
            u[i, 1] = (<double>(w1 >> 11) + 0.5) * scale
    return u


def accumulate(index, weights, Py_ssize_t size):
    cdef cnp.ndarray[cnp.intp_t, ndim=1] idx = np.ascontiguousarray(index, dtype=np.intp)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.zeros(size)
    cdef Py_ssize_t i, j, n = idx.shape[0]
    with nogil:
        for i in range(n):
            j = idx[i]
            if 0 <= j < size:
                out[j] += w[i]
    return out
