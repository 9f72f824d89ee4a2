"""PCG32 (XSH-RR, 64-bit state) for reproducible draws across implementations."""
from __future__ import annotations

_MASK64 = (1 << 64) - 1
_MULT = 6364136223846793005
DEFAULT_STREAM = 54


class PCG32:
    """Port of ``pcg32_srandom_r`` / ``pcg32_random_r`` / ``pcg32_boundedrand_r``."""

    def __init__(self, seed: int, stream: int = DEFAULT_STREAM):
        self.state = 0
        self.inc = ((int(stream) << 1) | 1) & _MASK64
        self.next_u32()
        self.state = (self.state + (int(seed) & _MASK64)) & _MASK64
        self.next_u32()

    def next_u32(self) -> int:
        old = self.state
        self.state = (old * _MULT + self.inc) & _MASK64
        xorshifted = (((old >> 18) ^ old) >> 27) & 0xFFFFFFFF
        rot = old >> 59
        return ((xorshifted >> rot) | (xorshifted << ((-rot) & 31))) & 0xFFFFFFFF

    def bounded(self, bound: int) -> int:
        """Unbiased integer in ``[0, bound)``."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        threshold = ((1 << 32) - bound) % bound
        while True:
            r = self.next_u32()
            if r >= threshold:
                return r % bound

    def randint(self, lo: int, hi: int) -> int:
        """Integer in ``[lo, hi]`` inclusive."""
        return lo + self.bounded(hi - lo + 1)

    def random(self) -> float:
        """Float in ``[0, 1)`` with 32 random bits."""
        return self.next_u32() / 4294967296.0

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()
