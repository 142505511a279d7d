"""Seeded random streams.

Every random quantity in a run is drawn from numpy's PCG64 bit generator,
keyed by ``(seed, stream name)`` through a :class:`numpy.random.SeedSequence`.
PCG64 output for a given seed sequence is fixed by numpy's stream-compatibility
policy and does not depend on the platform, so a run is reproducible from its
64-bit seed alone. Named streams keep delays, activations and data sampling
independent of each other: adding draws to one never shifts another.
"""

from __future__ import annotations

import zlib

import numpy as np

STREAMS = ("delays", "activation", "sample", "synthetic")


def stream_key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


def make_generator(seed: int, stream: str) -> np.random.Generator:
    if not 0 <= int(seed) < 2**64:
        raise ValueError(f"seed must fit in 64 bits, got {seed}")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(stream_key(stream),))
    return np.random.Generator(np.random.PCG64(ss))
