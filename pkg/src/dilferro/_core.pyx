# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: Gray-code enumeration, Walsh-Hadamard transform,
heat-bath sweeps, and the xoshiro256** stream.

Semantics are pinned to ``dilferro._kernels_py``; the two must stay
bit-for-bit interchangeable.
"""

import numpy as np

cimport numpy as cnp
from libc.stdint cimport int8_t, int32_t, int64_t, uint64_t

cnp.import_array()


cdef inline uint64_t _rotl(uint64_t x, int k) noexcept nogil:
    return (x << k) | (x >> (64 - k))


cdef inline uint64_t _next(uint64_t* s) noexcept nogil:
    cdef uint64_t result = _rotl(s[1] * <uint64_t>5, 7) * <uint64_t>9
    cdef uint64_t t = s[1] << 17
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return result


cdef inline double _u53(uint64_t* s) noexcept nogil:
    return <double>(_next(s) >> 11) * (1.0 / 9007199254740992.0)


cdef inline uint64_t _randbelow(uint64_t* s, uint64_t n) noexcept nogil:
    cdef uint64_t m = n - 1
    cdef int bits = 0
    cdef uint64_t mask, r
    while (m >> bits) != 0:
        bits += 1
    mask = ((<uint64_t>1) << bits) - 1
    while True:
        r = _next(s) & mask
        if r < n:
            return r


def rng_fill(uint64_t[::1] state, uint64_t[::1] out):
    """Fill ``out`` with xoshiro256** outputs; ``state`` updated in place."""
    cdef uint64_t s[4]
    cdef Py_ssize_t k
    s[0] = state[0]
    s[1] = state[1]
    s[2] = state[2]
    s[3] = state[3]
    with nogil:
        for k in range(out.shape[0]):
            out[k] = _next(s)
    state[0] = s[0]
    state[1] = s[1]
    state[2] = s[2]
    state[3] = s[3]


def config_energies(int n, edges_i, edges_j, fields=None):
    """Integer exponent e(sigma) over all 2**n configurations.

    Gray-code walk: one spin flip per step, O(degree) incremental update.
    Bit i set in the configuration word means sigma_i = +1.
    """
    cdef cnp.ndarray[cnp.int32_t, ndim=1] ei = np.ascontiguousarray(edges_i, dtype=np.int32)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] ej = np.ascontiguousarray(edges_j, dtype=np.int32)
    cdef Py_ssize_t n_edges = ei.shape[0]
    cdef int64_t size = (<int64_t>1) << n
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out = np.empty(size, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] h = np.zeros(n, dtype=np.int64)
    if fields is not None:
        h[:] = np.asarray(fields, dtype=np.int64)

    # CSR adjacency over non-self edges (self-pairs are configuration independent)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] deg = np.zeros(n + 1, dtype=np.int64)
    cdef Py_ssize_t v
    cdef int a, b
    cdef int64_t n_self = 0
    for v in range(n_edges):
        a = ei[v]
        b = ej[v]
        if a == b:
            n_self += 1
        else:
            deg[a + 1] += 1
            deg[b + 1] += 1
    cdef cnp.ndarray[cnp.int64_t, ndim=1] off = np.cumsum(deg).astype(np.int64)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] nbr = np.empty(off[n], dtype=np.int32)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] fill = off[:n].copy()
    for v in range(n_edges):
        a = ei[v]
        b = ej[v]
        if a != b:
            nbr[fill[a]] = b
            fill[a] += 1
            nbr[fill[b]] = a
            fill[b] += 1

    cdef int64_t[::1] out_v = out
    cdef int64_t[::1] off_v = off
    cdef int32_t[::1] nbr_v = nbr
    cdef int64_t[::1] h_v = h
    cdef int64_t e, k, g, nbsum
    cdef int bit, signew
    cdef Py_ssize_t idx
    with nogil:
        # config 0: all spins -1; every edge term is +1, field part is -sum h
        e = n_edges
        for idx in range(n):
            e -= h_v[idx]
        out_v[0] = e
        for k in range(1, size):
            bit = 0
            while not (k >> bit) & 1:
                bit += 1
            g = k ^ (k >> 1)
            signew = 1 if (g >> bit) & 1 else -1
            nbsum = h_v[bit]
            for idx in range(off_v[bit], off_v[bit + 1]):
                nbsum += 1 if (g >> nbr_v[idx]) & 1 else -1
            e += 2 * signew * nbsum
            out_v[g] = e
    return out


def wht_inplace(double[:, ::1] a):
    """In-place Walsh-Hadamard transform along axis 0 of a (2**n, m) array."""
    cdef Py_ssize_t size = a.shape[0]
    cdef Py_ssize_t m = a.shape[1]
    cdef Py_ssize_t h = 1
    cdef Py_ssize_t start, off, col
    cdef double x, y
    with nogil:
        while h < size:
            start = 0
            while start < size:
                for off in range(start, start + h):
                    for col in range(m):
                        x = a[off, col]
                        y = a[off + h, col]
                        a[off, col] = x + y
                        a[off + h, col] = x - y
                start += 2 * h
            h *= 2


def glauber_run(int8_t[:, ::1] spins, int32_t[::1] offsets, int32_t[::1] nbrs,
                int32_t[::1] wts, double[::1] ptable, int fmax,
                int burn_sweeps, int n_meas, int thin,
                uint64_t[::1] state, int8_t[:, :, ::1] out):
    """Heat-bath dynamics on s replica chains sharing one graph.

    Stream consumption per update is (site draw, uniform draw); snapshots are
    stored after every ``thin`` measurement-phase sweeps.
    """
    cdef uint64_t s[4]
    cdef Py_ssize_t n_rep = spins.shape[0]
    cdef Py_ssize_t n = spins.shape[1]
    cdef Py_ssize_t a, step, idx, m, sw
    cdef uint64_t site
    cdef int64_t f
    cdef double u
    s[0] = state[0]
    s[1] = state[1]
    s[2] = state[2]
    s[3] = state[3]
    with nogil:
        for sw in range(burn_sweeps):
            for a in range(n_rep):
                for step in range(n):
                    site = _randbelow(s, <uint64_t>n)
                    f = 0
                    for idx in range(offsets[site], offsets[site + 1]):
                        f += wts[idx] * spins[a, nbrs[idx]]
                    u = _u53(s)
                    spins[a, site] = 1 if u < ptable[f + fmax] else -1
        for m in range(n_meas):
            for sw in range(thin):
                for a in range(n_rep):
                    for step in range(n):
                        site = _randbelow(s, <uint64_t>n)
                        f = 0
                        for idx in range(offsets[site], offsets[site + 1]):
                            f += wts[idx] * spins[a, nbrs[idx]]
                        u = _u53(s)
                        spins[a, site] = 1 if u < ptable[f + fmax] else -1
            out[m, :, :] = spins
    state[0] = s[0]
    state[1] = s[1]
    state[2] = s[2]
    state[3] = s[3]
