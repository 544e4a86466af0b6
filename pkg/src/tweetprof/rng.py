"""Deterministic 64-bit PRNG for the synthetic corpus generator.

The generator is xoshiro256** (Blackman & Vigna), seeded through splitmix64.
Both are fully specified by the constants below, so a given seed produces the
same stream on every platform and in every implementation that follows the
same recipe. Do not swap this for a library RNG: the corpus generator's
"same seed, same corpus" guarantee depends on it.
"""

from __future__ import annotations

MASK64 = 0xFFFFFFFFFFFFFFFF

# splitmix64 constants
_SM_GAMMA = 0x9E3779B97F4A7C15
_SM_MIX1 = 0xBF58476D1CE4E5B9
_SM_MIX2 = 0x94D049BB133111EB


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


def splitmix64_stream(seed: int):
    """Yield the splitmix64 sequence for ``seed`` (used for state expansion)."""
    state = seed & MASK64
    while True:
        state = (state + _SM_GAMMA) & MASK64
        z = state
        z = ((z ^ (z >> 30)) * _SM_MIX1) & MASK64
        z = ((z ^ (z >> 27)) * _SM_MIX2) & MASK64
        yield z ^ (z >> 31)


class Xoshiro256StarStar:
    """xoshiro256** with the four 64-bit state words drawn from splitmix64."""

    def __init__(self, seed: int):
        if seed < 0:
            raise ValueError("seed must be a non-negative integer")
        sm = splitmix64_stream(seed)
        self._s = [next(sm) for _ in range(4)]

    def next_u64(self) -> int:
        s = self._s
        result = (_rotl((s[1] * 5) & MASK64, 7) * 9) & MASK64
        t = (s[1] << 17) & MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def random(self) -> float:
        """Uniform float in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def randbelow(self, n: int) -> int:
        """Uniform integer in [0, n), bias-free via rejection sampling."""
        if n <= 0:
            raise ValueError("n must be positive")
        # Reject draws from the tail that would wrap unevenly under mod n.
        limit = MASK64 + 1 - ((MASK64 + 1) % n)
        while True:
            r = self.next_u64()
            if r < limit:
                return r % n

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in the closed range [lo, hi]."""
        if hi < lo:
            raise ValueError("empty range")
        return lo + self.randbelow(hi - lo + 1)

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]

    def choice(self, items):
        return items[self.randbelow(len(items))]
