"""Deterministic random streams.

Every stochastic element of the package draws from numpy's PCG64 generator.
Streams are separated by purpose and replicate index through
``numpy.random.SeedSequence`` with entropy ``[base_seed, purpose_code,
replicate]``; SeedSequence's spreading function is stable across platforms
and numpy releases, so a (seed, purpose, replicate) triple always yields the
same byte stream.
"""

from __future__ import annotations

import numpy as np

# Purpose codes are part of the on-disk reproducibility contract: changing
# them silently changes every seeded artifact.
PURPOSES = {
    "weights": 0,
    "velocities": 1,
    "noise": 2,
    "split": 3,
    "subsample": 4,
}


def child_seed(base_seed: int, purpose: str, replicate: int = 0) -> np.random.SeedSequence:
    if purpose not in PURPOSES:
        raise ValueError(f"unknown random-stream purpose {purpose!r}")
    if replicate < 0:
        raise ValueError("replicate index must be >= 0")
    return np.random.SeedSequence(entropy=[int(base_seed), PURPOSES[purpose], int(replicate)])


def stream(base_seed: int, purpose: str, replicate: int = 0) -> np.random.Generator:
    """PCG64 generator for one (seed, purpose, replicate) triple."""
    return np.random.Generator(np.random.PCG64(child_seed(base_seed, purpose, replicate)))


def generator(seed) -> np.random.Generator:
    """PCG64 generator from a raw seed (int or SeedSequence)."""
    return np.random.Generator(np.random.PCG64(seed))
