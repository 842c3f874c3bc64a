"""Seed derivation and random-stream construction.

All randomness in the pipeline flows from a single master seed. Sub-seeds are
derived with :func:`stable_hash`, a fixed 64-bit mixing chain, so that derived
streams are portable across platforms and independent of execution schedule.
The mixing function is documented in README.md (Formats section) and must not
change between releases: on-disk datasets advertise the seed that reproduces
them.
"""

from __future__ import annotations

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF


def splitmix64(x: int) -> int:
    """One round of the splitmix64 mixer (Steele et al. finalizer)."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def stable_hash(*values: int) -> int:
    """Fold integers into a 64-bit seed, order-sensitive.

    h starts at splitmix64(0) and each value v is absorbed as
    h = splitmix64(h XOR splitmix64(v)). Negative inputs are reduced mod 2^64.
    """
    h = splitmix64(0)
    for v in values:
        h = splitmix64(h ^ splitmix64(int(v) & _MASK64))
    return h


def make_rng(*seed_values: int) -> np.random.Generator:
    """PCG64 generator seeded from the stable hash of ``seed_values``."""
    return np.random.Generator(np.random.PCG64(stable_hash(*seed_values)))


# Fixed stream tags so call sites cannot collide by accident. Tag values are
# arbitrary but frozen: changing them changes every derived dataset.
STREAM_GEOMETRY = 0x47454F4D      # "GEOM"
STREAM_PLACEMENT = 0x504C4143     # "PLAC"
STREAM_KINETICS = 0x4B494E45      # "KINE"
STREAM_NOISE = 0x4E4F4953         # "NOIS"
STREAM_LAYOUT = 0x4C41594F        # "LAYO"
STREAM_SPLIT = 0x53504C49         # "SPLI"
STREAM_SAMPLE = 0x53414D50        # "SAMP"
