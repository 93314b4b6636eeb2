"""Pinned deterministic random generator for RANSAC sampling.

RANSAC masks must be reproducible from a seed alone, across runs and across
reimplementations in other languages, so the sampler is spelled out here
instead of delegating to a library RNG.

Generator: xorshift64* (Marsaglia xorshift with a multiplicative output
scramble).  All arithmetic is modulo 2**64:

    x ^= x >> 12
    x ^= x << 25
    x ^= x >> 27
    output = x * 0x2545F4914F6CDD1D

A zero seed is invalid for xorshift state and is replaced by the constant
0x9E3779B97F4A7C15.  Bounded draws use plain modulo: ``next_below(n) =
next_u64() % n``.  Distinct k-subsets are drawn by repeated ``next_below``
with rejection of already-chosen indices, preserving draw order.
"""

_MASK = (1 << 64) - 1
_MULT = 0x2545F4914F6CDD1D
_ZERO_SEED_SUBSTITUTE = 0x9E3779B97F4A7C15


class Xorshift64Star:
    """64-bit xorshift* stream; see module docstring for the exact recipe."""

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        state = seed & _MASK
        self._state = state if state != 0 else _ZERO_SEED_SUBSTITUTE

    def next_u64(self) -> int:
        x = self._state
        x ^= x >> 12
        x = (x ^ (x << 25)) & _MASK
        x ^= x >> 27
        self._state = x
        return (x * _MULT) & _MASK

    def next_below(self, n: int) -> int:
        if n <= 0:
            raise ValueError("n must be positive")
        return self.next_u64() % n

    def sample_distinct(self, n: int, k: int) -> list[int]:
        """k distinct indices in [0, n), in draw order."""
        if k > n:
            raise ValueError(f"cannot draw {k} distinct values below {n}")
        chosen: list[int] = []
        while len(chosen) < k:
            idx = self.next_below(n)
            if idx not in chosen:
                chosen.append(idx)
        return chosen
