"""Seeded pseudo-random numbers for every reproducible selection.

The generator is splitmix64 (Steele, Lea, Flood 2014): 64-bit state, one
64-bit output per step. It is implemented here, rather than reaching for
``random.Random``, so that prompt selection, blinding and playlist orders
can be re-derived in any language from the documented constants alone.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


class SplitMix64:
    """splitmix64 stream seeded with a single 64-bit integer."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
        return z ^ (z >> 31)

    def below(self, bound: int) -> int:
        """Uniform integer in [0, bound), rejection sampled to avoid modulo bias."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        limit = (1 << 64) - ((1 << 64) % bound)
        while True:
            v = self.next_u64()
            if v < limit:
                return v % bound

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle driven by this stream."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]

    def token(self, nbytes: int = 8) -> str:
        """Opaque lowercase hex token of ``nbytes`` drawn from the stream."""
        blocks = (nbytes + 7) // 8
        raw = b"".join(self.next_u64().to_bytes(8, "little") for _ in range(blocks))
        return raw[:nbytes].hex()
