"""Counter-based random streams.

Each stream is a Philox generator keyed by the master seed whose counter
words carry ``(trial, block, stage)``, so a stream depends only on those
coordinates and never on scheduling order.
"""

from __future__ import annotations

import numpy as np

STAGE_NOISE = 0
STAGE_PERMUTATION = 1
STAGE_OUTCOMES = 2

_MASK64 = (1 << 64) - 1


def _key(seed: int) -> np.ndarray:
    seed = int(seed)
    if seed < 0 or seed >> 128:
        raise ValueError("master seed must be a non-negative integer below 2**128")
    return np.array([seed & _MASK64, (seed >> 64) & _MASK64], dtype=np.uint64)


def stream(seed: int, trial: int, block: int = 0, stage: int = STAGE_NOISE) -> np.random.Generator:
    counter = np.array([0, trial, block, stage], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(counter=counter, key=_key(seed)))
