"""Pure NumPy/Python fallback for the compiled kernels in ``dilferro._core``.

Every function here is semantically identical to its compiled twin: exact
integer energies, the same Walsh-Hadamard butterfly order, and bit-identical
random streams in the Glauber kernel.  ``tests/test_backends.py`` asserts the
equivalence whenever the extension is available.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_CHUNK = 1 << 20


def config_energies(n, edges_i, edges_j, fields=None):
    """Integer exponent e(sigma) = sum_nu sigma_i sigma_j + sum_i h_i sigma_i.

    Configurations are indexed by an n-bit word; bit i set means sigma_i = +1.
    Returns an int64 array of length 2**n.
    """
    size = 1 << n
    out = np.empty(size, dtype=np.int64)
    ei = np.asarray(edges_i, dtype=np.int64)
    ej = np.asarray(edges_j, dtype=np.int64)
    for start in range(0, size, _CHUNK):
        blk = np.arange(start, min(start + _CHUNK, size), dtype=np.int64)
        acc = np.zeros(blk.shape[0], dtype=np.int64)
        for i, j in zip(ei, ej):
            bi = (blk >> i) & 1
            bj = (blk >> j) & 1
            acc += 1 - 2 * (bi ^ bj)  # +1 when spins agree
        if fields is not None:
            for i, h in enumerate(fields):
                h = int(h)
                if h:
                    acc += h * (2 * ((blk >> i) & 1) - 1)
        out[start : start + blk.shape[0]] = acc
    return out


def wht_inplace(a):
    """In-place Walsh-Hadamard transform along axis 0 of a (2**n, m) array."""
    size = a.shape[0]
    h = 1
    while h < size:
        b = a.reshape(-1, 2, h, a.shape[1])
        x = b[:, 0].copy()
        b[:, 0] += b[:, 1]
        b[:, 1] = x - b[:, 1]
        h *= 2


def rng_fill(state, out):
    """Fill ``out`` with xoshiro256** outputs; ``state`` updated in place."""
    s0, s1, s2, s3 = (int(v) for v in state)
    for k in range(out.shape[0]):
        result = (((s1 * 5) & _MASK64) << 7 | ((s1 * 5) & _MASK64) >> 57) & _MASK64
        result = (result * 9) & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = ((s3 << 45) | (s3 >> 19)) & _MASK64
        out[k] = result
    state[0] = s0
    state[1] = s1
    state[2] = s2
    state[3] = s3


def glauber_run(spins, offsets, nbrs, wts, ptable, fmax, burn_sweeps, n_meas, thin, state, out):
    """Heat-bath dynamics on s replica chains sharing one graph.

    One sweep = for each replica, n single-site updates at uniformly random
    sites.  Per update the stream is consumed as (site draw, uniform draw),
    matching the compiled kernel exactly.  Snapshots of all chains are copied
    into ``out[m]`` after every ``thin`` sweeps of the measurement phase.
    """
    s0, s1, s2, s3 = (int(v) for v in state)
    n_rep, n = spins.shape
    sp = [[int(v) for v in spins[a]] for a in range(n_rep)]
    off = [int(v) for v in offsets]
    nb = [int(v) for v in nbrs]
    wt = [int(v) for v in wts]
    pt = [float(v) for v in ptable]
    mask = (1 << max(n - 1, 0).bit_length()) - 1

    def next64():
        nonlocal s0, s1, s2, s3
        r = (((s1 * 5) & _MASK64) << 7 | ((s1 * 5) & _MASK64) >> 57) & _MASK64
        r = (r * 9) & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = ((s3 << 45) | (s3 >> 19)) & _MASK64
        return r

    def sweep():
        for a in range(n_rep):
            row = sp[a]
            for _ in range(n):
                while True:
                    site = next64() & mask
                    if site < n:
                        break
                f = 0
                for idx in range(off[site], off[site + 1]):
                    f += wt[idx] * row[nb[idx]]
                u = (next64() >> 11) * 2.0**-53
                row[site] = 1 if u < pt[f + fmax] else -1

    for _ in range(burn_sweeps):
        sweep()
    for m in range(n_meas):
        for _ in range(thin):
            sweep()
        for a in range(n_rep):
            out[m, a, :] = sp[a]
    for a in range(n_rep):
        spins[a, :] = sp[a]
    state[0] = s0
    state[1] = s1
    state[2] = s2
    state[3] = s3
