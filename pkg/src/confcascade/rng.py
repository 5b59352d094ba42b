"""Pinned portable PRNG for all fold/split shuffling.

SplitMix64 (Steele, Lea & Flood's published constants) is small enough to
re-implement bit-exactly in any language, which keeps fold plans stable
across implementations and runs. Nothing in this package shuffles through
any other generator.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def mix64(x: int) -> int:
    """SplitMix64 finalizer: avalanche a 64-bit value."""
    x &= _MASK64
    x = ((x ^ (x >> 30)) * _MIX1) & _MASK64
    x = ((x ^ (x >> 27)) * _MIX2) & _MASK64
    return x ^ (x >> 31)


def derive_seed(*parts: int) -> int:
    """Fold integer parts into one well-mixed 64-bit seed.

    Order-sensitive: derive_seed(a, b) != derive_seed(b, a) in general.
    """
    acc = 0
    for p in parts:
        acc = mix64(acc ^ mix64(p & _MASK64))
    return acc


class SplitMix64:
    """Deterministic 64-bit generator with a one-word state."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK64
        return mix64(self._state)

    def next_below(self, n: int) -> int:
        """Uniform integer in [0, n) via rejection sampling (no modulo bias)."""
        if n <= 0:
            raise ValueError("n must be positive")
        threshold = (1 << 64) % n
        while True:
            x = self.next_u64()
            if x >= threshold:
                return x % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.next_below(i + 1)
            items[i], items[j] = items[j], items[i]
