"""Deterministic random-stream derivation.

Every stochastic stage draws from a generator keyed by (master seed,
stage tag, index).  Streams are derived statelessly, so the order in
which parallel workers run can never change a result.
"""

from __future__ import annotations

import numpy as np

SAMPLE_STREAM = 0
BALL_STREAM = 1
KEY_BALL_STREAM = 2


def stream(master_seed: int, *key: int) -> np.random.Generator:
    """Return the generator for a (seed, stage, index...) spawn key."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=key))


def check_seed(seed) -> int:
    if not isinstance(seed, (int, np.integer)) or isinstance(seed, bool):
        raise ValueError(f"master seed must be an integer, got {seed!r}")
    if seed < 0:
        raise ValueError(f"master seed must be non-negative, got {seed}")
    return int(seed)
