"""Counter-based, platform-independent random streams.

Per-trial seeds are derived with :class:`numpy.random.SeedSequence` (a fixed
hashing scheme) and consumed by the Philox4x64 counter-based generator.
"""
from __future__ import annotations

import numpy as np


def split_seed(master: int, index: int) -> int:
    """Derive the seed of trial ``index`` from a master seed.

    The derivation depends only on ``(master, index)``, so trials can run in
    any order or in parallel.
    """
    ss = np.random.SeedSequence(entropy=int(master), spawn_key=(int(index),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def generator(seed: int) -> np.random.Generator:
    """Philox generator for a derived seed."""
    return np.random.Generator(np.random.Philox(int(seed)))


def trial_rng(master: int, index: int) -> np.random.Generator:
    return generator(split_seed(master, index))
