"""Seeded random streams.

Every random draw in the package comes from a numpy ``Generator`` backed by
PCG64, seeded through ``SeedSequence`` with a tuple of non-negative integers.
The tuple identifies the stream: the root seed first, then indices that name
the consumer (e.g. ``(seed, cell, trial)`` for an oracle-suite trial, or
``(noise_seed, sample)`` for a batch member's initial noise). Separate
consumers therefore never share or shift each other's streams.

Reproducibility contract: identical stream keys give bit-identical draws on a
given build. Matching the streams of other implementations is a non-goal.
"""

import numpy as np


def stream(*key: int) -> np.random.Generator:
    """Generator for the stream named by ``key``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(key)))


def uniform_matrix(gen: np.random.Generator, rows: int, cols: int,
                   scale: float = 1.0, dtype=np.float64) -> np.ndarray:
    """Matrix with entries uniform in [-scale, scale], drawn in f64 then cast."""
    return (gen.uniform(-1.0, 1.0, (rows, cols)) * scale).astype(dtype)
