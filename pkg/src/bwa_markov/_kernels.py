"""numba kernels for chain stepping at large n.

The kernels replicate rng.double_at exactly (same splitmix64 constants) so a
walk driven here consumes the identical uniform stream as the pure-python
path sampler: same key, same counters, same states.
"""

from __future__ import annotations

import numpy as np
from numba import njit, uint64

_GOLDEN = uint64(0x9E3779B97F4A7C15)
_MIX1 = uint64(0xBF58476D1CE4E5B9)
_MIX2 = uint64(0x94D049BB133111EB)
_INV53 = 1.0 / (1 << 53)


@njit(cache=True, inline="always")
def _u01(key: uint64, counter: uint64) -> float:
    z = key + (counter + uint64(1)) * _GOLDEN
    z = (z ^ (z >> uint64(30))) * _MIX1
    z = (z ^ (z >> uint64(27))) * _MIX2
    z = z ^ (z >> uint64(31))
    return (z >> uint64(11)) * _INV53


@njit(cache=True, inline="always")
def _pick(cum_row: np.ndarray, u: float) -> int:
    k = cum_row.shape[0]
    for j in range(k - 1):
        if u < cum_row[j]:
            return j
    return k - 1


@njit(cache=True)
def walk_states(cum_rows: np.ndarray, cum_init: np.ndarray, key: uint64, n: int) -> np.ndarray:
    """Materialized state-index walk; step t consumes stream counter t-1."""
    out = np.empty(n, dtype=np.int64)
    s = _pick(cum_init, _u01(key, uint64(0)))
    out[0] = s
    for t in range(1, n):
        s = _pick(cum_rows[s], _u01(key, uint64(t)))
        out[t] = s
    return out


@njit(cache=True)
def visit_counts(cum_rows: np.ndarray, cum_init: np.ndarray, key: uint64, n: uint64) -> np.ndarray:
    """Per-state visit counts of the same walk, never materialized."""
    k = cum_rows.shape[0]
    counts = np.zeros(k, dtype=np.int64)
    s = _pick(cum_init, _u01(key, uint64(0)))
    counts[s] += 1
    for t in range(uint64(1), n):
        s = _pick(cum_rows[s], _u01(key, t))
        counts[s] += 1
    return counts


@njit(cache=True)
def visit_sign_counts(
    cum_rows: np.ndarray,
    cum_init: np.ndarray,
    key: uint64,
    noise_key: uint64,
    n: uint64,
) -> np.ndarray:
    """(state, sign) visit counts; sign bit t comes from the noise stream.

    Column 0 counts steps whose noise uniform fell below 1/2, column 1 the
    rest, matching the two-point noise convention.
    """
    k = cum_rows.shape[0]
    counts = np.zeros((k, 2), dtype=np.int64)
    s = _pick(cum_init, _u01(key, uint64(0)))
    counts[s, 0 if _u01(noise_key, uint64(0)) < 0.5 else 1] += 1
    for t in range(uint64(1), n):
        s = _pick(cum_rows[s], _u01(key, t))
        counts[s, 0 if _u01(noise_key, t) < 0.5 else 1] += 1
    return counts
