"""Seed derivation.

Every random stream is a child of ``(seed, experiment, purpose, index...)``
built with :class:`numpy.random.SeedSequence` spawn keys, so a drop's
randomness depends only on its index and never on execution order or on
how many workers share the run.
"""

import zlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _tag(label):
    if isinstance(label, str):
        return zlib.crc32(label.encode("utf-8"))
    return int(label)


def seed_sequence(seed, *path):
    """SeedSequence for the stream addressed by ``path`` under ``seed``."""
    return np.random.SeedSequence(int(seed) & _MASK64, spawn_key=tuple(_tag(p) for p in path))


def stream(seed, *path):
    """A fresh ``Generator`` for the addressed stream."""
    return np.random.Generator(np.random.PCG64(seed_sequence(seed, *path)))


def drop_streams(seed, experiment, drop_index, names):
    """Named, independent generators for one Monte-Carlo drop."""
    return {name: stream(seed, experiment, "drop", drop_index, name) for name in names}
