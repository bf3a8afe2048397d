"""Portable seeded randomness shared by all modules.

All random draws go through numpy's PCG64 generator, seeded through a
SeedSequence built from explicit integer keys.  PCG64's stream is stable
across platforms and numpy releases, so identically-keyed generators
produce bit-identical draws everywhere.
"""

from __future__ import annotations

import hashlib

import numpy as np


def stable_hash64(text: str) -> int:
    """Map a string to a stable unsigned 64-bit integer (sha256-based)."""
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def make_rng(*keys: int) -> np.random.Generator:
    """Create a generator keyed by one or more integers.

    The key tuple fully determines the stream; the same keys always
    yield the same draws, independent of platform.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(list(keys))))
