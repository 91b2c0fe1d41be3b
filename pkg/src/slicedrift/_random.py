"""Seeded random generators and seed derivation.

All randomness goes through ``numpy.random.Generator`` backed by PCG64, seeded
with a non-negative integer. Experiment cells derive their own seeds as

    derived = master_seed XOR blake2b(repr(keys))[:8]   (masked to 63 bits)

so each cell's stream depends only on the master seed and the cell's labels,
never on execution order.
"""
import hashlib
import math
from fractions import Fraction

import numpy as np

_MASK63 = (1 << 63) - 1


def make_rng(seed):
    return np.random.Generator(np.random.PCG64(int(seed)))


def derive_seed(master_seed, *keys):
    digest = hashlib.blake2b(repr(keys).encode("utf-8"), digest_size=8).digest()
    return (int(master_seed) ^ int.from_bytes(digest, "big")) & _MASK63


def round_half_away(x):
    """Round to the nearest integer, halves away from zero. Exact for ``Fraction`` input."""
    half = Fraction(1, 2) if isinstance(x, Fraction) else 0.5
    return int(math.floor(x + half)) if x >= 0 else -int(math.floor(-x + half))
