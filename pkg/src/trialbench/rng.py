"""Seeded randomness.

All randomness in the package flows through Philox4x32-10 counter-based
generators keyed as ``key = seed | (stream << 64)`` with a 64-bit seed and a
64-bit stream index. Philox output is platform-independent, so any run is
reproducible from (seed, stream indices) alone.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix64(x: int) -> int:
    """splitmix64 finalizer."""
    x &= _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Generator for the given seed; extra indices select derived streams.

    The stream indices are folded into the upper 64 key bits, so
    (seed, i, j) pairs give independent, reproducible streams.
    """
    h = 0
    for s in stream:
        h = _mix64(h ^ ((s & _MASK64) + _GOLDEN + ((h << 6) & _MASK64) + (h >> 2)))
    key = (seed & _MASK64) | (h << 64)
    return np.random.Generator(np.random.Philox(key=key))


def randbelow_bigint(rng: np.random.Generator, bound: int) -> int:
    """Uniform integer in [0, bound) for arbitrary-precision bounds.

    Rejection sampling on fixed-width bit draws, so the result depends only
    on the generator stream.
    """
    if bound <= 0:
        raise ValueError("bound must be positive")
    nbits = bound.bit_length()
    nbytes = (nbits + 7) // 8
    shift = 8 * nbytes - nbits
    while True:
        raw = rng.bytes(nbytes)
        k = int.from_bytes(raw, "big") >> shift
        if k < bound:
            return k
