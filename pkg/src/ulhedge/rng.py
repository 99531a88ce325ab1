"""Counter-based random streams for reproducible, scheduling-independent runs.

Every consumer of randomness (a simulated world, a particle cloud, a
Feynman-Kac probe) gets its own Philox stream keyed by ``(seed, purpose,
index)``.  Because the key fully determines the stream, path ``i`` draws the
same numbers whether it is generated alone, in a chunk, or on a different
worker count.
"""

from __future__ import annotations

import numpy as np

# purpose codes: keep stable, they are part of the reproducibility contract
PATHS = 0
DEATH = 1
FILTER = 2
PROBE = 3


def stream(seed: int, purpose: int, index: int) -> np.random.Generator:
    """Return the Philox generator for one (purpose, index) consumer."""
    if not 0 <= index < 2**32:
        raise ValueError(f"stream index out of range: {index}")
    key = np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF),
                    np.uint64((purpose << 32) | index)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def unit_exponential(rng: np.random.Generator) -> float:
    """Draw a strictly positive unit-exponential variate.

    The uniform is resampled on the (measure-zero) event u == 0 so the
    returned variate lies in the open interval (0, inf); this keeps the death
    time strictly positive.
    """
    u = rng.random()
    while u == 0.0:
        u = rng.random()
    return -np.log1p(-u)
