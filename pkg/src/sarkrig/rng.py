"""Counter-based random number streams.

All randomness in the package flows through named Philox substreams so
that any unit of work (a training pair, a conditional draw) can be
regenerated independently of the others. Philox is counter-based, which
makes substreams cheap to construct and safe to hand to parallel workers.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    # Standard SplitMix64 finalizer; stable across platforms.
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def substream(seed: int, *path: int) -> np.random.Generator:
    """Return a Generator for the substream named by ``(seed, *path)``.

    The same (seed, path) always yields the same stream; distinct paths
    yield independent streams. ``path`` components must be integers.
    """
    lo = int(seed) & _MASK64
    hi = 0
    for p in path:
        hi = _splitmix64(hi ^ _splitmix64(int(p) & _MASK64))
    key = (hi << 64) | lo
    return np.random.Generator(np.random.Philox(key=key))


def as_generator(seed) -> np.random.Generator:
    """Accept an int seed or an existing Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return substream(int(seed))
