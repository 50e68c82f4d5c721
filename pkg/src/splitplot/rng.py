"""Counter-based random streams.

Every random draw in the package comes from a Philox generator keyed by a
master seed plus a tuple of integer stream coordinates (replication index,
group index, chunk index, ...). Streams with different coordinates are
statistically independent, and a stream's content does not depend on the
order in which streams are created, so results do not depend on how work is
split across processes.
"""

from __future__ import annotations

import numpy as np

# Stream tags keep the coordinate spaces of different consumers disjoint.
TAG_SUBSAMPLE = 1
TAG_DATA = 2
TAG_TEST = 3
TAG_MIXTURE = 4
TAG_BOOTSTRAP = 5


def substream(seed: int, *keys: int) -> np.random.Generator:
    """Return the generator for stream ``keys`` under master ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, *keys: int) -> int:
    """Derive a 64-bit integer seed for a child computation."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
