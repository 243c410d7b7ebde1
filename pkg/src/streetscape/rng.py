"""Pinned deterministic randomness primitives.

The split shuffle and the per-sample augmentation seeds must be reproducible
across implementations, so the algorithms are fixed here rather than borrowed
from a runtime's default RNG: SplitMix64 for the shuffle stream and a
SHA-256-derived 64-bit hash for per-sample seed derivation.
"""

from __future__ import annotations

import hashlib
import struct

_MASK64 = (1 << 64) - 1


class SplitMix64:
    """SplitMix64 PRNG (Steele et al.); 64-bit output per step."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        """Uniform integer in [0, n) by rejection sampling (unbiased)."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            u = self.next_u64()
            if u < limit:
                return u % n


def fisher_yates(items: list, seed: int) -> list:
    """Deterministic Fisher-Yates shuffle driven by SplitMix64(seed)."""
    rng = SplitMix64(seed)
    out = list(items)
    for i in range(len(out) - 1, 0, -1):
        j = rng.below(i + 1)
        out[i], out[j] = out[j], out[i]
    return out


def hash64(base_seed: int, sample_id: str) -> int:
    """64-bit per-sample seed: first 8 bytes (little-endian) of
    SHA-256(base_seed as signed little-endian int64 || sample_id utf-8)."""
    digest = hashlib.sha256(
        struct.pack("<q", base_seed) + sample_id.encode("utf-8")
    ).digest()
    return int.from_bytes(digest[:8], "little")
