"""Deterministic random stream derivation.

Every stochastic quantity in the package draws from a counter-based Philox
generator keyed by ``(entity_seed, purpose)``. Streams for different purposes
are independent by construction, so adding draws to one stage can never shift
the values seen by another. Entity seeds are derived from a master seed with a
splitmix64 mix, which keeps per-body streams independent of how many bodies a
run generates and of the order they are generated in.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

# purpose slots; gaps are reserved for future stages
GEOMETRY = 0
CHANGE = 1
MATERIAL_EPOCH_BASE = 16
SENSOR_NOISE_BASE = 256


def _splitmix64(state: int) -> int:
    state = (state + _GOLDEN) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(master_seed: int, index: int) -> int:
    """Mix a master seed and an entity index into a 64-bit entity seed."""
    if index < 0:
        raise ValueError(f"index must be non-negative, got {index}")
    state = (int(master_seed) + (index + 1) * _GOLDEN) & _MASK64
    return _splitmix64(state)


def stream(entity_seed: int, purpose: int) -> np.random.Generator:
    """Generator for one purpose slot of one entity.

    Parameters
    ----------
    entity_seed:
        64-bit seed identifying the entity (body, dataset, ...).
    purpose:
        Slot constant, e.g. ``GEOMETRY`` or ``SENSOR_NOISE_BASE + trial``.
    """
    key = np.array([int(entity_seed) & _MASK64, int(purpose) & _MASK64],
                   dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
