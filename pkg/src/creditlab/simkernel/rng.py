"""Counter-based random numbers keyed by (seed, customer, loan, month, purpose).

Each draw is a pure function of its key, so a customer's trajectory never
depends on how many draws other customers consumed.  The mixer is the
SplitMix64 finaliser applied to the key words in sequence.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30, _S27, _S31, _S11 = np.uint64(30), np.uint64(27), np.uint64(31), np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0

# purpose tags
ENTRY = 1
INS_APPLY = 2
CSS_APPLY = 3
STEP = 4
AMOUNT = 5
TERM = 6
DEMOGRAPHIC = 7
NOISE = 8


def _mix(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):  # arithmetic is mod 2**64 by design
        z = z + _GOLDEN
        z = (z ^ (z >> _S30)) * _M1
        z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def keyed_bits(seed: int, *keys) -> np.ndarray:
    arrays = np.broadcast_arrays(*[np.asarray(k, dtype=np.int64) for k in keys])
    h = _mix(np.full(arrays[0].shape, np.uint64(seed & 0xFFFFFFFFFFFFFFFF)))
    for k in arrays:
        h = _mix(h ^ k.astype(np.uint64))
    return h


def keyed_uniform(seed: int, *keys) -> np.ndarray:
    """Uniform draws on [0, 1) with 53-bit resolution, one per broadcast key."""
    return (keyed_bits(seed, *keys) >> _S11).astype(np.float64) * _INV53


def keyed_normal(seed: int, *keys) -> np.ndarray:
    # clipped so the inverse CDF stays finite at u == 0
    return ndtri(np.clip(keyed_uniform(seed, *keys), 1e-300, None))
