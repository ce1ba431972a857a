import numpy as np

# Stream tags keep the random draws of different purposes disjoint for a given seed.
INSTANCE_STREAM = 0
TRAIN_STREAM = 1
EVAL_STREAM = 2
RANDOM_POLICY_STREAM = 3
ANALYSIS_STREAM = 4
CANDIDATE_STREAM = 5
ORACLE_STREAM = 6


def make_rng(*keys: int) -> np.random.Generator:
    """Generator seeded from an ordered tuple of non-negative integer keys"""
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in keys]))


def derive_seed(*keys: int) -> int:
    """Single 32-bit seed derived from an ordered tuple of keys"""
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])
