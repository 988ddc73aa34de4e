"""Portable pseudo-random number generation.

Every stochastic component in this package (weight init, dropout masks,
shuffles, synthetic data) draws from the splitmix64 generator implemented
here rather than from ``random`` or ``numpy.random``, so that results are
reproducible bit-for-bit across platforms and library versions.

splitmix64 reference: Steele, Lea & Flood's SplittableRandom mixer.  The
state advances by a fixed odd constant and the output is a finalizer of
the new state, so jumping ahead n steps is a single multiply.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

# 2**-53; multiplying a 53-bit integer by this yields a double in [0, 1).
_DOUBLE_UNIT = 1.0 / (1 << 53)


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


def derive_seed(base: int, *words: int) -> int:
    """Derive a child seed from a base seed and a sequence of stream tags.

    The words are absorbed sequentially with a mix between each absorption,
    so (a, b) and (b, a) yield different children.  Used to give every
    consumer (init, dropout, per-epoch shuffle, ...) its own independent
    stream from one experiment seed.
    """
    state = _mix((base + _GAMMA) & _MASK64)
    for word in words:
        state = _mix((state + _GAMMA + (word & _MASK64)) & _MASK64)
    return state


class SplitMix64:
    """Deterministic 64-bit generator with scalar and vectorized output.

    The vectorized methods produce exactly the same stream as repeated
    scalar calls; they compute the n successor states directly as
    ``state + k * gamma`` in uint64 arithmetic and finalize in parallel.
    """

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK64
        return _mix(self._state)

    def next_double(self) -> float:
        """Uniform double in [0, 1) using the top 53 bits."""
        return (self.next_u64() >> 11) * _DOUBLE_UNIT

    def next_below(self, n: int) -> int:
        """Uniform integer in [0, n), unbiased via rejection sampling."""
        if n <= 0:
            raise ValueError(f"bound must be positive, got {n}")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n

    def shuffle(self, items) -> None:
        """In-place Fisher-Yates shuffle of a mutable sequence."""
        for i in range(len(items) - 1, 0, -1):
            j = self.next_below(i + 1)
            items[i], items[j] = items[j], items[i]

    def u64_array(self, n: int) -> np.ndarray:
        """The next n raw outputs as a uint64 array (state advances by n)."""
        if n < 0:
            raise ValueError(f"count must be non-negative, got {n}")
        steps = np.arange(1, n + 1, dtype=np.uint64)
        z = np.uint64(self._state) + steps * np.uint64(_GAMMA)
        self._state = (self._state + n * _GAMMA) & _MASK64
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        return z ^ (z >> np.uint64(31))

    def doubles(self, n: int) -> np.ndarray:
        """n uniform doubles in [0, 1)."""
        return (self.u64_array(n) >> np.uint64(11)).astype(np.float64) * _DOUBLE_UNIT

    def uniform(self, low: float, high: float, n: int) -> np.ndarray:
        """n uniform doubles in [low, high)."""
        return low + self.doubles(n) * (high - low)

    def normals(self, n: int) -> np.ndarray:
        """n standard normal doubles via the Box-Muller transform.

        Draws are consumed in pairs (u1, u2); u1 is shifted into (0, 1] so
        the log never sees zero.  Outputs keep pair order: cos term first.
        """
        pairs = (n + 1) // 2
        raw = self.u64_array(2 * pairs)
        u1 = ((raw[0::2] >> np.uint64(11)).astype(np.float64) + 1.0) * _DOUBLE_UNIT
        u2 = (raw[1::2] >> np.uint64(11)).astype(np.float64) * _DOUBLE_UNIT
        radius = np.sqrt(-2.0 * np.log(u1))
        theta = (2.0 * np.pi) * u2
        out = np.empty(2 * pairs, dtype=np.float64)
        out[0::2] = radius * np.cos(theta)
        out[1::2] = radius * np.sin(theta)
        return out[:n]

    def bernoulli(self, n: int, p: float) -> np.ndarray:
        """n draws in {0.0, 1.0} with P(1) = p, as float64."""
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"probability must be in [0, 1], got {p}")
        return (self.doubles(n) < p).astype(np.float64)
