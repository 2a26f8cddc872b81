"""Deterministic, splittable random streams built on the Philox counter-based generator.

A stream is fully determined by ``(seed, path)`` where ``path`` is a tuple of
integers naming the substream (e.g. ``(sample_index, lane, load_index)``).
The 128-bit Philox key is derived by folding the seed and each path element
through the SplitMix64 finalizer, so identical inputs produce identical draw
sequences on every platform, in any execution order.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix64(z: int) -> int:
    # SplitMix64 finalizer (Steele et al.); bijective on 64-bit ints
    z = (z + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def _derive_key(seed: int, path: tuple[int, ...]) -> int:
    lo = _mix64(seed & _MASK64)
    hi = _mix64((seed & _MASK64) ^ _GOLDEN)
    for element in path:
        e = element & _MASK64
        lo = _mix64(lo ^ _mix64(e))
        hi = _mix64(hi ^ _mix64(e ^ _GOLDEN))
    return (hi << 64) | lo


class RngStream:
    """One deterministic draw sequence identified by a 64-bit seed and a key path."""

    __slots__ = ("seed", "path", "_gen")

    def __init__(self, seed: int, path: tuple[int, ...] = ()):
        self.seed = int(seed)
        self.path = tuple(int(p) for p in path)
        self._gen = np.random.Generator(np.random.Philox(key=_derive_key(self.seed, self.path)))

    def substream(self, *path: int) -> "RngStream":
        """A child stream keyed by this stream's path extended with ``path``."""
        return RngStream(self.seed, self.path + path)

    def uniform(self, size: int | None = None):
        """Uniform draws on [0, 1)."""
        return self._gen.random(size)

    def standard_gamma(self, shape, size=None):
        return self._gen.standard_gamma(shape, size)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, path={self.path})"
