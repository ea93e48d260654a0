"""Named, counter-based random streams.

Every random draw in the package comes from ``stream(seed, name, *index)``:
a Philox generator keyed by ``SeedSequence(seed, spawn_key=(code, *index))``.
The same ``(seed, name, index)`` triple always yields the same numbers, on any
machine, regardless of how work is ordered or split across workers.
"""
from __future__ import annotations

import numpy as np

STREAM_CODES = {
    "trajectory": 1,
    "collapse-schedule": 2,
    "collapse-center": 3,
    "initial-sample": 4,
    "statistical-postulate": 5,
    "pipeline": 6,
}

SEED_MASK = (1 << 64) - 1


def stream(seed: int, name: str, *index: int) -> np.random.Generator:
    try:
        code = STREAM_CODES[name]
    except KeyError:
        raise KeyError(f"unknown stream {name!r}; known: {sorted(STREAM_CODES)}") from None
    ss = np.random.SeedSequence(int(seed) & SEED_MASK, spawn_key=(code, *(int(i) for i in index)))
    return np.random.Generator(np.random.Philox(ss))
