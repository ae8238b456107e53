"""Deterministic counter-based random streams.

Every stochastic stage of the pipeline draws from an `RngStream`, a
counter-based generator built on the splitmix64 finalizer.  Draws depend only
on (seed, counter), use fixed-width 64-bit integer arithmetic throughout, and
are therefore identical across processes and platforms.  Streams are
splittable: `split(tag)` derives an independent child stream, which is how
seeds propagate to document hashing, parameter init, shuffling, dropout and
mask noise without any shared mutable state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_SPLIT_DOMAIN = 0xD6E8FEB86659FD93
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x00000100000001B3

# Vectorized splitmix64 needs uint64 numpy constants; scalar math stays in
# Python ints because numpy warns on scalar uint64 overflow.
_NP_GOLDEN = np.uint64(_GOLDEN)
_NP_MIX1 = np.uint64(_MIX1)
_NP_MIX2 = np.uint64(_MIX2)


def mix64(x: int) -> int:
    """splitmix64 finalizer over a single 64-bit word."""
    x &= _MASK64
    x = (x + _GOLDEN) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


def fnv1a64(data: bytes) -> int:
    """FNV-1a 64-bit hash; used to key streams on token strings."""
    h = _FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * _FNV_PRIME) & _MASK64
    return h


def _mix_array(x: np.ndarray) -> np.ndarray:
    x = (x + _NP_GOLDEN)
    z = (x ^ (x >> np.uint64(30))) * _NP_MIX1
    z = (z ^ (z >> np.uint64(27))) * _NP_MIX2
    return z ^ (z >> np.uint64(31))


@dataclass
class RngStream:
    """Splittable counter-based stream: identical (seed, counter) -> identical draws."""

    seed: int
    counter: int = 0

    def __post_init__(self):
        self.seed &= _MASK64
        self.counter &= _MASK64

    def split(self, tag: int) -> "RngStream":
        """Derive an independent child stream; deterministic in (seed, tag)."""
        child = mix64(self.seed ^ mix64((tag & _MASK64) ^ _SPLIT_DOMAIN))
        return RngStream(child, 0)

    def raw(self, n: int) -> np.ndarray:
        """n raw 64-bit words; advances the counter by n."""
        base = np.uint64((self.seed + ((self.counter + 1) & _MASK64) * _GOLDEN) & _MASK64)
        words = _mix_array(base + np.arange(n, dtype=np.uint64) * _NP_GOLDEN)
        self.counter = (self.counter + n) & _MASK64
        return words

    def uniforms(self, n: int) -> np.ndarray:
        """n float64 samples uniform on the open interval (0, 1)."""
        words = self.raw(n)
        return ((words >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53

    def uniform_signed(self, n: int) -> np.ndarray:
        """n float64 samples uniform on (-1, 1)."""
        return self.uniforms(n) * 2.0 - 1.0

    def gumbels(self, n: int) -> np.ndarray:
        """n standard Gumbel samples via -ln(-ln(u))."""
        u = self.uniforms(n)
        return -np.log(-np.log(u))

    def permutation(self, n: int) -> np.ndarray:
        """Deterministic permutation of range(n)."""
        return np.argsort(self.raw(n), kind="stable")


def token_stream(seed: int, token: str) -> RngStream:
    """Stream keyed on (seed, token string); equal tokens yield equal streams."""
    return RngStream(mix64((seed & _MASK64) ^ mix64(fnv1a64(token.encode("utf-8")))))
