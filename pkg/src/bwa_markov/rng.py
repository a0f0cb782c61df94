"""Counter-based random streams.

Every stochastic routine in this package draws from a keyed counter stream:
``value = mix(key + counter * GOLDEN)`` with the splitmix64 finalizer as the
mixer.  Streams are addressed, not stateful, so trial j of an experiment can
be regenerated in isolation and results do not depend on execution order.
Keys are derived by folding integer lanes (seed, trial index, purpose tag)
into a single 64-bit key.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_INV53 = 1.0 / (1 << 53)


def mix64(z: int) -> int:
    """splitmix64 finalizer on a 64-bit integer."""
    z &= MASK64
    z = (z ^ (z >> 30)) * _MIX1 & MASK64
    z = (z ^ (z >> 27)) * _MIX2 & MASK64
    return z ^ (z >> 31)


def derive_key(seed: int, *lanes: int) -> int:
    """Fold a seed and any number of integer lanes into a stream key.

    Distinct lane tuples give statistically independent streams.
    """
    key = mix64((seed & MASK64) ^ 0x5851F42D4C957F2D)
    for lane in lanes:
        key = mix64(key ^ mix64((lane & MASK64) + GOLDEN))
    return key


def u64_at(key: int, counter: int) -> int:
    """The counter-th raw 64-bit word of the stream."""
    return mix64((key + ((counter + 1) * GOLDEN)) & MASK64)


def double_at(key: int, counter: int) -> float:
    """The counter-th uniform double in [0, 1)."""
    return (u64_at(key, counter) >> 11) * _INV53


def doubles(key: int, count: int, start: int = 0) -> np.ndarray:
    """Uniform doubles for counters start .. start+count-1, vectorized.

    Bit-identical to calling double_at at each counter.
    """
    idx = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    z = np.uint64(key) + idx * np.uint64(GOLDEN)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(11)).astype(np.float64) * _INV53


def numpy_generator(key: int) -> np.random.Generator:
    """A numpy Generator seeded deterministically from a stream key.

    Used where numpy's exact discrete samplers (binomial, multinomial,
    beta) are needed; the key fixes the whole draw sequence.
    """
    return np.random.Generator(np.random.Philox(key=key & MASK64))
