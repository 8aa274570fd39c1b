# app/core/random_utils.py
from typing import List

import numpy as np


def make_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


def spawn_rngs(seed: int, count: int) -> List[np.random.Generator]:
    """每个用户对一条独立随机流"""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(int(seed)).spawn(count)]


def trial_seed(seed: int, trial: int) -> int:
    """由 (seed, trial) 派生场景种子，与调度顺序无关"""
    return int(np.random.SeedSequence([int(seed), int(trial)]).generate_state(1, dtype=np.uint32)[0])
