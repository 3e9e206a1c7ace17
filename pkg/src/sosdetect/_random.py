# sosdetect/_random.py
# !/usr/bin/env python3

"""
Seeded random streams.

All randomness in sosdetect comes from numpy's PCG64 generator. Independent
per-task streams are derived with SeedSequence spawn keys, so a task's stream
depends only on (seed, task id) and never on scheduling order.
"""

import numpy as np

PRNG_NAME = "pcg64"


def make_rng(seed: int, *task: int) -> np.random.Generator:
    """Returns a PCG64 generator for `seed`, optionally keyed by a task id path."""
    sequence = np.random.SeedSequence(int(seed), spawn_key=tuple(int(t) for t in task))
    return np.random.Generator(np.random.PCG64(sequence))


def derive_seed(rng: np.random.Generator) -> int:
    """Draws a fresh 63-bit seed from a generator."""
    return int(rng.integers(0, 2**63 - 1))
