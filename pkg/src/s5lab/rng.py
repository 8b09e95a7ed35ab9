"""Seeded random streams.

Every random draw in the package comes from a ``numpy`` Philox generator, a
counter-based bit generator (Salmon et al., 2011: Philox-4x64 with 10 rounds).
A stream is identified by an integer seed plus a tuple of integer stream keys;
``numpy.random.SeedSequence`` hashes ``(seed, keys)`` into the Philox key, so
streams with different keys are statistically independent and a given
``(seed, keys)`` reproduces the same numbers on every platform.
"""

import numpy as np


def make_rng(seed, *keys):
    """Return a generator for the stream ``(seed, *keys)``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


# stream keys; kept fixed so checkpoints stay reproducible across releases
STREAM_B = 1
STREAM_C = 2
STREAM_D = 3
STREAM_LOG_DELTA = 4
STREAM_C_BACKWARD = 5
STREAM_DENSE = 10
STREAM_SHUFFLE = 20
STREAM_DATA = 30
STREAM_EQUIV = 40
STREAM_FORCING = 41
