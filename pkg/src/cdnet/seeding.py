"""Deterministic RNG stream derivation.

Every run takes one top-level seed; independent streams (chain training,
partner sampling, classifier init, batch shuffling, ...) are derived from it
by hashing string labels into a SeedSequence spawn key. Same seed + same
labels = same stream, on any platform.
"""

import zlib

import numpy as np


def _spawn_key(labels):
    return tuple(zlib.crc32(str(label).encode("utf-8")) for label in labels)


def derive_rng(seed, *labels):
    """Independent PCG64 generator for (seed, labels)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=_spawn_key(labels))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed, *labels):
    """Derived integer seed, for handing to nested configs."""
    ss = np.random.SeedSequence(int(seed), spawn_key=_spawn_key(labels))
    return int(ss.generate_state(1, dtype=np.uint32)[0])
