"""Keyed, counter-based random streams.

Every stochastic quantity draws from a Philox generator whose key is derived
from ``(seed, *key)``. A stream's output therefore depends only on its key and
on the order of draws within that stream, never on which other streams were
created or consumed first.
"""

import numpy as np

# Stream identifiers. Part of the reproducibility contract; do not renumber.
TRUTH = 0
SIGNAL_NOISE = 1
OBS_NOISE = 2
ENSEMBLE_INIT = 3
ENSEMBLE_NOISE = 4


def stream(seed, *key):
    """Return a generator keyed by ``(seed, *key)``.

    Parameters
    ----------
    seed : int
        Master seed.
    *key : int
        Non-negative integers identifying the stream, e.g. ``(OBS_NOISE, k)``.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(x) for x in key))
    return np.random.Generator(np.random.Philox(ss))
