"""Seeded random streams.

Every stream is a Philox (counter-based) generator keyed by the master seed
and a tuple of integers ``key``.  Replica ``r`` of a looped simulation uses
``stream(seed, r)``; chunk ``c`` of a vectorised batch uses
``stream(seed, CHUNK_TAG, c)``.  Any replica or chunk can therefore be
regenerated in isolation, and results do not depend on how work is split
across processes.
"""

from __future__ import annotations

import numpy as np

CHUNK_TAG = 1 << 20
CHUNK_SIZE = 1 << 14


def stream(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def as_generator(seed) -> np.random.Generator:
    """Accept an int seed, a SeedSequence or an existing Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        raise TypeError("a seed is required; runs must be reproducible")
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    return stream(int(seed))


def chunks(replicas: int, chunk_size: int = CHUNK_SIZE):
    """Yield ``(chunk_index, size)`` covering ``replicas`` items."""
    c = 0
    done = 0
    while done < replicas:
        size = min(chunk_size, replicas - done)
        yield c, size
        done += size
        c += 1
