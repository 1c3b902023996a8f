"""Deterministic random numbers, reproducible across platforms and runs.

The generator is SplitMix64 (Steele, Lea & Flood's mix function). State
advances by the 64-bit golden-ratio increment and each output is the
finalizer applied to the new state:

    state  <- (state + 0x9E3779B97F4A7C15) mod 2^64
    z      <- state
    z      <- (z xor (z >> 30)) * 0xBF58476D1CE4E5B9   mod 2^64
    z      <- (z xor (z >> 27)) * 0x94D049BB133111EB   mod 2^64
    output <- z xor (z >> 31)

Doubles in [0, 1) take the top 53 bits: (output >> 11) * 2^-53. Normal
deviates use Box-Muller on pairs of uniforms (u1 shifted into (0, 1]), so a
call for n deviates consumes 2*ceil(n/2) raw outputs. Bounded integers use
rejection sampling on the top bits, so they are exactly uniform.

Because the state is an arithmetic progression, blocks of outputs are
produced vectorized with numpy uint64 arithmetic; the stream is identical
to repeated scalar calls.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_INV_2_53 = 2.0 ** -53


def _mix64(z: int) -> int:
    z &= _MASK
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


def _fnv1a(data: bytes) -> int:
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & _MASK
    return h


def derive_seed(master: int, *parts: int | str) -> int:
    """Stable sub-stream seed from a master seed and a label path.

    Parts may be ints or strings; strings are hashed with FNV-1a so the
    result does not depend on the process or platform. Order matters.
    """
    h = _mix64((master & _MASK) ^ _GOLDEN)
    for part in parts:
        if isinstance(part, str):
            v = _fnv1a(part.encode("utf-8"))
        else:
            v = part & _MASK
        h = _mix64((h + _GOLDEN) ^ v)
    return h


class SplitMix64:
    """Seeded stream of uniforms, normals and bounded ints (see module docs)."""

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        self._state = seed & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK
        return _mix64(self._state)

    def _block_u64(self, n: int) -> np.ndarray:
        # finalizer applied to state + (1..n)*GOLDEN, identical to n scalar calls
        steps = np.arange(1, n + 1, dtype=np.uint64)
        z = np.uint64(self._state) + steps * np.uint64(_GOLDEN)
        self._state = (self._state + n * _GOLDEN) & _MASK
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        return z ^ (z >> np.uint64(31))

    def uniform(self, n: int | None = None) -> float | np.ndarray:
        """Doubles in [0, 1)."""
        if n is None:
            return (self.next_u64() >> 11) * _INV_2_53
        return ((self._block_u64(n) >> np.uint64(11)).astype(np.float64)) * _INV_2_53

    def symmetric(self, n: int) -> np.ndarray:
        """Doubles in [-1, 1)."""
        return 2.0 * self.uniform(n) - 1.0

    def normal(self, n: int | None = None) -> float | np.ndarray:
        """Standard normal deviates via Box-Muller."""
        scalar = n is None
        m = 1 if scalar else n
        pairs = (m + 1) // 2
        u = self.uniform(2 * pairs)
        u1 = (u[0::2] * (1.0 - _INV_2_53)) + _INV_2_53  # into (0, 1]
        u2 = u[1::2]
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        out = np.empty(2 * pairs)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        return float(out[0]) if scalar else out[:m]

    def randint(self, n: int) -> int:
        """Uniform integer in [0, n) by rejection, exactly unbiased."""
        if n <= 0:
            raise ValueError("randint bound must be positive")
        limit = (_MASK + 1) - ((_MASK + 1) % n)
        while True:
            v = self.next_u64()
            if v < limit:
                return v % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randint(i + 1)
            items[i], items[j] = items[j], items[i]
