"""Deterministic RNG sub-stream derivation.

Every random draw in the package comes from a PCG64 generator seeded
through :class:`numpy.random.SeedSequence` with an explicit domain key,
so that independent parts of a run (population init, per-level
simulation, optimizer sampling, synthetic data generation) never share
a stream even when they share the same master seed.

Synthetic ground-truth generation uses domains >= 1000; fitting and
simulation use domains < 1000. Keeping the two ranges disjoint
guarantees that truth data and the fitting machinery never consume the
same randomness.
"""

import numpy as np

# Fitting / simulation domains.
DOMAIN_POPULATION_INIT = 1
DOMAIN_LEVEL = 2
DOMAIN_OPTIMIZER = 3
DOMAIN_OBJECTIVE_SIM = 4
DOMAIN_CV = 5

# Synthetic-truth domains (disjoint from the fitting range above).
DOMAIN_TRUTH = 1001
DOMAIN_EPISODES = 1002
DOMAIN_DIFFICULTY_CURVE = 1003

_UINT64_MAX = np.iinfo(np.uint64).max


def substream(seed: int, *key: int) -> np.random.Generator:
    """Return a generator for the sub-stream ``(seed, *key)``.

    The same (seed, key) pair always yields the same stream; distinct
    keys yield statistically independent streams. SFC64 rather than the
    default PCG64: normal draws dominate the simulation hot path and
    SFC64 produces them about 25% faster at equivalent quality.
    """
    ss = np.random.SeedSequence(_as_seed(seed), spawn_key=tuple(key))
    return np.random.Generator(np.random.SFC64(ss))


def derive_seed(seed: int, *key: int) -> int:
    """Collapse a sub-stream identity into a plain 64-bit seed."""
    ss = np.random.SeedSequence(_as_seed(seed), spawn_key=tuple(key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _as_seed(seed: int) -> int:
    seed = int(seed)
    if not -(2**63) <= seed <= _UINT64_MAX:
        raise ValueError(f"seed {seed} does not fit in 64 bits")
    # SeedSequence wants non-negative entropy; fold negatives into the upper half.
    return seed if seed >= 0 else seed + 2**64
