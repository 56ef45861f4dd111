"""Deterministic random streams (xoshiro256** seeded via splitmix64).

Every stochastic routine in the package draws from a :class:`RandomStream`,
which is fully determined by ``(master_seed, stream_id)``.  The generator is
implemented both here (pure Python) and in the compiled kernel module with
bit-identical semantics, so results are reproducible across platforms and
across backends.

Stream derivation: the 256-bit xoshiro state is filled with four successive
splitmix64 outputs, starting from ``master_seed + stream_id * 0xD2B74407B1CE6E93``
(mod 2^64).  Bounded integers use bitmask rejection (unbiased); uniform doubles
use the top 53 bits, ``(x >> 11) * 2**-53``.
"""

from __future__ import annotations

import numpy as np

from . import kernels

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_STREAM_STEP = 0xD2B74407B1CE6E93  # odd, so stream ids map injectively mod 2^64


def splitmix64(x: int) -> tuple[int, int]:
    """One splitmix64 step: returns (output, next_state)."""
    x = (x + _GOLDEN) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    z ^= z >> 31
    return z, x


def _seed_state(master_seed: int, stream_id: int) -> list[int]:
    x = (int(master_seed) + int(stream_id) * _STREAM_STEP) & _MASK64
    s = []
    for _ in range(4):
        z, x = splitmix64(x)
        s.append(z)
    if not any(s):  # xoshiro state must not be all zero
        s[0] = _GOLDEN
    return s


def derive_seed(master_seed: int, *components: int) -> int:
    """Deterministic 64-bit sub-seed from a master seed and integer tags."""
    x = int(master_seed) & _MASK64
    for c in components:
        x ^= ((int(c) & _MASK64) * _STREAM_STEP) & _MASK64
        x, _ = splitmix64(x)
    return x


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


class RandomStream:
    """xoshiro256** stream identified by (master_seed, stream_id)."""

    __slots__ = ("_s",)

    def __init__(self, master_seed: int, stream_id: int = 0):
        self._s = _seed_state(master_seed, stream_id)

    # -- state interchange with the compiled kernels ------------------------

    def state_array(self) -> np.ndarray:
        return np.array(self._s, dtype=np.uint64)

    def set_state_array(self, arr: np.ndarray) -> None:
        self._s = [int(v) for v in arr]

    # -- scalar draws --------------------------------------------------------

    def next_u64(self) -> int:
        s = self._s
        result = (_rotl((s[1] * 5) & _MASK64, 7) * 9) & _MASK64
        t = (s[1] << 17) & _MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def uniform(self) -> float:
        """Uniform double in [0, 1) with 53-bit resolution."""
        return (self.next_u64() >> 11) * 2.0**-53

    def randbelow(self, n: int) -> int:
        """Unbiased integer in [0, n) via bitmask rejection."""
        if n < 1:
            raise ValueError("randbelow requires n >= 1")
        mask = (1 << (n - 1).bit_length()) - 1
        while True:
            r = self.next_u64() & mask
            if r < n:
                return r

    # -- batched draws (same sequence as repeated scalar calls) -------------

    def u64s(self, count: int) -> np.ndarray:
        state = self.state_array()
        out = np.empty(count, dtype=np.uint64)
        kernels.rng_fill(state, out)
        self.set_state_array(state)
        return out

    def uniforms(self, count: int) -> np.ndarray:
        return (self.u64s(count) >> np.uint64(11)) * 2.0**-53

    def spawn(self, stream_id: int) -> "RandomStream":
        """Child stream derived from this stream's next output."""
        return RandomStream(self.next_u64(), stream_id)
