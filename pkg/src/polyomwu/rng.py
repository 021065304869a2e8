"""Deterministic stream splitting for every random draw in the package.

All randomness flows through PCG64 generators seeded via
``numpy.random.SeedSequence(root_seed, spawn_key=...)``.  The spawn key names
what the stream is for, so distinct parts of a run never share a stream and
identical ``(root_seed, key)`` pairs reproduce bit-identical draws on every
platform numpy supports.

Stream-splitting rule:

* game edges:        ``(STREAM_GAME, i, j)``   one stream per undirected edge
* delay schedules:   ``(STREAM_DELAY, agent)`` one stream per agent
* zero-sum sampling: ``(STREAM_CHECK,)``       pure-profile draws
* miscellaneous:     ``(STREAM_MISC, ...)``    tests and ad-hoc sampling
"""

from __future__ import annotations

import numpy as np

STREAM_GAME = 0
STREAM_DELAY = 1
STREAM_CHECK = 2
STREAM_MISC = 3


def substream(seed: int, *key: int) -> np.random.Generator:
    """Return the generator for the substream named by ``key`` under ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))
