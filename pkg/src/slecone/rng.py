"""Seeded, counter-based random streams.

Every sub-task gets its own Philox stream keyed by ``(seed, *key)``, so the
streams do not depend on the order in which sub-tasks are run.
"""

import numpy as np

MASK64 = (1 << 64) - 1


def make_rng(seed, *key):
    """Generator for the sub-stream ``key`` of a 64-bit ``seed``."""
    ss = np.random.SeedSequence(int(seed) & MASK64, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def as_rng(rng):
    """Accept a Generator, an int seed, or None (fresh entropy)."""
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None:
        return np.random.default_rng()
    return make_rng(rng)


def seed_of(rng):
    return int(rng) if isinstance(rng, (int, np.integer)) else None
