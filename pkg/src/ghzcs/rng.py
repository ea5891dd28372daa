"""Seed derivation. Every random stream is a pure function of (seed, keys)."""
import zlib

import numpy as np


def _as_int(key) -> int:
    if isinstance(key, str):
        return zlib.crc32(key.encode())
    return int(key)


def seed_sequence(seed: int, *keys) -> np.random.SeedSequence:
    if int(seed) < 0:
        raise ValueError("seeds must be non-negative")
    return np.random.SeedSequence([int(seed), *(_as_int(k) for k in keys)])


def derive_seed(seed: int, *keys) -> int:
    """A child seed for the stream labelled by ``keys``."""
    return int(seed_sequence(seed, *keys).generate_state(1, dtype=np.uint64)[0] >> 1)


def generator(seed: int, *keys) -> np.random.Generator:
    return np.random.default_rng(seed_sequence(seed, *keys))
