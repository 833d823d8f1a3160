"""Seed derivation and generator construction.

Every random draw in the package flows from an integer seed through
:func:`generator`, so results never depend on global state or scheduling.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One SplitMix64 step: mix a 64-bit integer into a well-spread 64-bit seed."""
    z = (int(x) + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def worker_seed(master_seed: int, k: int) -> int:
    """Seed for worker ``k`` (1-based) of a distributed run."""
    return splitmix64((int(master_seed) + int(k)) & MASK64)


def retry_seed(seed: int, attempt: int) -> int:
    """Fresh seed for the ``attempt``-th redraw after a singular sketch."""
    if attempt == 0:
        return int(seed) & MASK64
    return splitmix64((int(seed) + int(attempt)) & MASK64)


def generator(seed: int) -> np.random.Generator:
    """Counter-based (Philox) generator keyed by ``seed``."""
    return np.random.Generator(np.random.Philox(int(seed) & MASK64))
