"""Substream derivation: one parent seed reproduces the whole run.

Every consumer of randomness draws from `substream(seed, STREAM, ...)` with
a distinct stream id, so adding draws to one stage never shifts another.
"""

from __future__ import annotations

import numpy as np

PARAM_STREAM = 1     # parameter initialization, one index per component
EPISODE_STREAM = 2   # meta-test episode sampling, one index per repetition
AUGMENT_STREAM = 3   # augmentation, indexed by (epoch, view)
DATA_STREAM = 4      # synthetic graph generation


def substream(seed: int, *path: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), *map(int, path)])
