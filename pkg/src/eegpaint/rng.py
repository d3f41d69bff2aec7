"""Seeded random numbers: PCG32 (XSH-RR, 64-bit state) plus Box-Muller.

This is the only randomness source in the package.  Seeding follows the
reference ``pcg32_srandom(initstate, initseq)`` routine, so
``Pcg32(42, 54)`` reproduces the reference demo stream
(0xa15c02b7, 0x7b47f409, ...).

Derived quantities:

* ``random``: 53-bit doubles in [0, 1) built from two consecutive outputs,
  ``((a >> 5) * 2**26 + (b >> 6)) / 2**53``.
* ``normal``: Box-Muller on pairs ``(u1, u2)`` with ``u1`` mapped to (0, 1];
  each pair yields ``r cos(2 pi u2)`` then ``r sin(2 pi u2)``.
* ``integers``: ``low + floor(random * (high - low))``.
* ``permutation``: stable argsort of ``n`` uniform draws.
"""
from __future__ import annotations

import numpy as np

from . import kernels

DEFAULT_STREAM = 54
_MASK64 = (1 << 64) - 1


class Pcg32:
    def __init__(self, seed: int, stream: int = DEFAULT_STREAM):
        self.inc = ((int(stream) << 1) | 1) & _MASK64
        self.state = 0
        self._step()
        self.state = (self.state + (int(seed) & _MASK64)) & _MASK64
        self._step()

    def _step(self):
        self.state = (self.state * kernels.PCG_MULT + self.inc) & _MASK64

    def random_u32(self, n: int) -> np.ndarray:
        out, self.state = kernels.pcg32_fill(self.state, self.inc, int(n))
        return out

    def next_u32(self) -> int:
        return int(self.random_u32(1)[0])

    def next_u64(self) -> int:
        hi, lo = self.random_u32(2)
        return (int(hi) << 32) | int(lo)

    def random(self, size=None):
        n = _count(size)
        raw = self.random_u32(2 * n).astype(np.uint64)
        a = raw[0::2] >> np.uint64(5)
        b = raw[1::2] >> np.uint64(6)
        u = (a.astype(np.float64) * 67108864.0 + b.astype(np.float64)) * (1.0 / 9007199254740992.0)
        return _shape(u, size)

    def uniform(self, low=0.0, high=1.0, size=None):
        u = self.random(size)
        return low + (high - low) * u

    def normal(self, loc=0.0, scale=1.0, size=None):
        n = _count(size)
        pairs = (n + 1) // 2
        u = self.random(2 * pairs)
        u1 = 1.0 - u[0::2]
        u2 = u[1::2]
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        z = np.empty(2 * pairs)
        z[0::2] = r * np.cos(theta)
        z[1::2] = r * np.sin(theta)
        return _shape(loc + scale * z[:n], size)

    def integers(self, low: int, high: int, size=None):
        if high <= low:
            raise ValueError("empty integer range")
        u = self.random(size)
        out = low + np.floor(np.asarray(u) * (high - low)).astype(np.int64)
        return int(out) if size is None else out

    def permutation(self, n: int) -> np.ndarray:
        return np.argsort(self.random(int(n)), kind="stable")

    def choice(self, n: int, size=None):
        return self.integers(0, n, size)


def derive_seed(seed: int, *keys: int) -> int:
    """A 64-bit child seed for ``keys`` under ``seed`` (one PCG stream per key path)."""
    s = int(seed) & _MASK64
    for k in keys:
        s = Pcg32(s, stream=int(k) & ((1 << 63) - 1)).next_u64()
    return s


def _count(size) -> int:
    if size is None:
        return 1
    return int(np.prod(size, dtype=np.int64))


def _shape(arr, size):
    if size is None:
        return float(arr[0])
    return arr.reshape(size)
