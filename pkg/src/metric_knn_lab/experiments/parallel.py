"""Seeded trial runner: one generator per trial, results in trial order."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np


def trial_rng(seed: int, trial: int, *stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(trial), *map(int, stream))))


def resolve_threads(threads=None) -> int:
    if threads is None:
        threads = os.environ.get("METRIC_KNN_LAB_THREADS", 1)
    threads = int(threads)
    if threads < 1:
        raise ValueError("threads must be >= 1")
    return threads


def run_trials(fn: Callable[[int, np.random.Generator], object], seed: int, trials: int, threads=1) -> list:
    """``[fn(t, rng_t) for t in range(trials)]``, optionally on a thread pool.

    Each trial owns a generator derived from ``(seed, t)``, so the results do
    not depend on the number of threads.
    """
    threads = resolve_threads(threads)
    work = lambda t: fn(t, trial_rng(seed, t))
    if threads == 1 or trials <= 1:
        return [work(t) for t in range(trials)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(work, range(trials)))
