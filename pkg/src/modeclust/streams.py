"""Deterministic RNG substreams.

Every stochastic stage of an experiment draws from its own generator, keyed by
(master seed, integer key parts). Adding grid cells or reordering loops never
perturbs the stream another cell sees.
"""

import numpy as np

# stage tags used as substream key parts
STAGE_MIXTURE = 1
STAGE_SAMPLE = 2
STAGE_MC = 3
STAGE_PROBE = 4


def substream(master_seed, *key):
    """Return a Generator seeded by (master_seed, key...). Same inputs, same stream."""
    parts = tuple(int(k) for k in key)
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=parts)
    return np.random.default_rng(ss)
