"""Deterministic pseudo-random numbers for every seeded choice in the toolkit.

All record selection, shuffling, and synthetic sampling run on SplitMix64
(Steele, Lea & Flood 2014): a 64-bit counter advanced by the golden-gamma
constant and scrambled by two xor-shift multiplies.  The generator is an
implementation constant of the project: the same seed must produce the same
datasets, splits, streams, and reports on any platform, so nothing here may
ever delegate to `random` or to NumPy's global state.

Derived seeds are produced by `mix`, which folds integer tags into a
SplitMix64 scramble.  Python's builtin `hash` is salted per process and is
never used for seeding.
"""

from __future__ import annotations

import math
from typing import Sequence, TypeVar

T = TypeVar("T")

_MASK64 = 0xFFFFFFFFFFFFFFFF
_GAMMA = 0x9E3779B97F4A7C15


def _scramble(z: int) -> int:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _MASK64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK64
    return z ^ (z >> 31)


def mix(*values: int) -> int:
    """Fold integers into one 64-bit seed, order-sensitively.

    mix(a, b) != mix(b, a) in general, so positional tags (see the TAG_*
    constants below) keep independently-seeded subsystems decorrelated.
    """
    h = _GAMMA
    for v in values:
        h = _scramble((h + (v & _MASK64)) & _MASK64)
        h = (h + _GAMMA) & _MASK64
    return _scramble(h)


# Stream identifiers for derived seeds. Values are arbitrary but frozen;
# changing any of them changes every downstream artifact.
TAG_WRITER = 1
TAG_SPLIT = 2
TAG_DEV = 3
TAG_EXPLOIT = 4
TAG_CHUNK = 5
TAG_UPDATE = 6
TAG_RUN = 7
TAG_MODEL = 8
TAG_MIXED = 9
TAG_DRIFT = 10


class SplitMix64:
    """Minimal deterministic generator with the helpers this project needs."""

    __slots__ = ("_state", "_spare_gauss")

    def __init__(self, seed: int) -> None:
        self._state = seed & _MASK64
        self._spare_gauss: float | None = None

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK64
        return _scramble(self._state)

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def randrange(self, n: int) -> int:
        """Uniform integer in [0, n) by rejection, bias-free."""
        if n <= 0:
            raise ValueError("randrange needs n >= 1")
        # Reject the partial block at the top of the 64-bit range.
        limit = _MASK64 - (_MASK64 % n)
        while True:
            u = self.next_u64()
            if u < limit:
                return u % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randrange(i + 1)
            items[i], items[j] = items[j], items[i]

    def sample(self, population: Sequence[T], k: int) -> list[T]:
        """k distinct items, in draw order (partial Fisher-Yates)."""
        n = len(population)
        if k > n:
            raise ValueError(f"cannot sample {k} items from population of {n}")
        pool = list(population)
        out: list[T] = []
        for i in range(k):
            j = i + self.randrange(n - i)
            pool[i], pool[j] = pool[j], pool[i]
            out.append(pool[i])
        return out

    def choice(self, population: Sequence[T]) -> T:
        return population[self.randrange(len(population))]

    def gauss(self) -> float:
        """Standard normal via Box-Muller, caching the spare deviate."""
        if self._spare_gauss is not None:
            z = self._spare_gauss
            self._spare_gauss = None
            return z
        # u1 in (0, 1] so the log is finite.
        u1 = 1.0 - self.random()
        u2 = self.random()
        r = math.sqrt(-2.0 * math.log(u1))
        self._spare_gauss = r * math.sin(2.0 * math.pi * u2)
        return r * math.cos(2.0 * math.pi * u2)

    def normals(self, n: int) -> list[float]:
        return [self.gauss() for _ in range(n)]
