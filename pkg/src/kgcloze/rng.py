"""Reference 64-bit PRNG used everywhere randomness must be reproducible.

All shuffles, draws, and embedding initializations in this package go through
``SplitMix64`` so that a fixed seed yields bit-identical results across runs,
thread counts, and platforms.  The generator is the xor-shift-multiply mixer
with increment 0x9E3779B97F4A7C15 and mixing constants 0xBF58476D1CE4E5B9 /
0x94D049BB133111EB; any conforming implementation in another language will
agree with it exactly.
"""

from __future__ import annotations

from typing import List, MutableSequence, Sequence, TypeVar

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

T = TypeVar("T")


def mix64(value: int) -> int:
    """One mixing round; used to derive independent sub-seeds."""
    z = (value + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


class SplitMix64:
    """Sequential splitmix64 stream over a 64-bit state."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_uint64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
        return z ^ (z >> 31)

    def next_below(self, bound: int) -> int:
        """Uniform-ish integer in [0, bound) via modulo (bias negligible, documented)."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        return self.next_uint64() % bound

    def next_float(self) -> float:
        """Float64 in [0, 1) built from the top 53 bits."""
        return (self.next_uint64() >> 11) * (2.0 ** -53)

    def choice(self, seq: Sequence[T]) -> T:
        if not seq:
            raise ValueError("cannot choose from an empty sequence")
        return seq[self.next_below(len(seq))]

    def shuffle(self, items: MutableSequence[T]) -> None:
        """In-place Fisher-Yates walk from the tail."""
        for i in range(len(items) - 1, 0, -1):
            j = self.next_below(i + 1)
            items[i], items[j] = items[j], items[i]

    def shuffled(self, items: Sequence[T]) -> List[T]:
        out = list(items)
        self.shuffle(out)
        return out


def derive_seed(seed: int, *tags: int) -> int:
    """Derive an independent stream seed from a base seed and integer tags."""
    acc = seed & _MASK64
    for tag in tags:
        acc = mix64(acc ^ (tag & _MASK64))
    return acc


def stable_hash(text: str) -> int:
    """Process-independent 64-bit hash of a string (sha256 prefix)."""
    import hashlib

    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "big")
