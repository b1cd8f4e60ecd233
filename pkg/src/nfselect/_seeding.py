"""Deterministic RNG derivation.

Every stochastic component derives its own generator from a master seed
plus a path of tags, so results never depend on call order, scheduling,
or thread count.
"""

import zlib

import numpy as np


def _as_words(parts):
    words = []
    for part in parts:
        if isinstance(part, str):
            words.append(zlib.crc32(part.encode("utf-8")))
        elif isinstance(part, (int, np.integer)):
            if part < 0:
                raise ValueError("seed path entries must be non-negative")
            words.append(int(part))
        else:
            raise TypeError(f"unsupported seed path entry: {part!r}")
    return words


def seed_sequence(seed, *path):
    """SeedSequence for (seed, *path); path entries are ints or string tags."""
    return np.random.SeedSequence(_as_words([seed, *path]))


def spawn_rng(seed, *path):
    """Independent Generator for the given seed path."""
    return np.random.Generator(np.random.PCG64(seed_sequence(seed, *path)))


def kernel_seed(rng):
    """63-bit state word for the jitted splitmix stream, drawn from ``rng``."""
    return np.uint64(rng.integers(1, 2**63, dtype=np.int64))
