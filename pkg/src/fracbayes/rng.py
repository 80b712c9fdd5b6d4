"""Seeded random streams and seed mixing.

Every random quantity in the package comes from a named stream derived from
an integer seed, so results never depend on call order across stages or on
how work is split between workers.
"""
from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15

# stream tags
NOISE = 0
PILOT = 1
CANDIDATES = 2
RESAMPLE = 3
PREDICT = 4


def stream(seed: int, *tags: int) -> np.random.Generator:
    """Philox generator keyed by ``seed`` and a tuple of stream tags."""
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(t) for t in tags))
    return np.random.Generator(np.random.Philox(ss))


def splitmix64(x: int) -> int:
    """SplitMix64 finalizer; a bijection on 64-bit integers."""
    x &= MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def derive_seed(base_seed: int, index: int) -> int:
    """Mix ``base_seed`` with a flat job index.

    For fixed ``base_seed`` the map index -> seed is injective over
    0 <= index < 2**64, so replicate seeds never collide.
    """
    return splitmix64((base_seed + index * GOLDEN) & MASK64)
