"""SplitMix64: a counter-based 64-bit generator pinned for reproducible shuffles.

Output ``k`` (k = 0, 1, ...) for seed ``s`` is ``mix(s + (k + 1) * GAMMA mod 2**64)``
with

    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 mod 2**64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB mod 2**64
    z =  z ^ (z >> 31)

and ``GAMMA = 0x9E3779B97F4A7C15``. A bounded draw in ``[0, m)`` is
``(u64 * m) >> 64``. ``shuffle`` is Fisher-Yates from the last position down,
drawing ``j`` in ``[0, i]`` for ``i = len - 1, ..., 1``.
"""

from __future__ import annotations

from typing import Sequence

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15


def mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


class SplitMix64:
    def __init__(self, seed: int):
        self.seed = seed & MASK64
        self.counter = 0

    def next_u64(self) -> int:
        self.counter += 1
        return mix64((self.seed + self.counter * GAMMA) & MASK64)

    def below(self, m: int) -> int:
        return (self.next_u64() * m) >> 64


def shuffle(items: Sequence[int], seed: int) -> list[int]:
    out = list(items)
    gen = SplitMix64(seed)
    for i in range(len(out) - 1, 0, -1):
        j = gen.below(i + 1)
        out[i], out[j] = out[j], out[i]
    return out
