"""Seeded Monte Carlo driver and aggregation."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from functools import partial
from typing import Callable

import numpy as np

from ..core import TrialSummary, monte_carlo_aggregate

DEFAULT_SEED = 20240601


def trial_seed(master: int, trial: int) -> np.random.SeedSequence:
    """Per-trial seed derived from the master seed and the trial index only."""
    return np.random.SeedSequence(master, spawn_key=(trial,))


def _one(fn, scenario, master, trial):
    return fn(scenario, np.random.default_rng(trial_seed(master, trial)))


def run_trials(fn: Callable, scenario, trials: int, master_seed: int = DEFAULT_SEED, workers: int = 1) -> list:
    """Run ``fn(scenario, rng)`` for trial indices 0..trials-1.

    Results do not depend on ``workers``; each trial owns its RNG stream.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    job = partial(_one, fn, scenario, master_seed)
    if workers <= 1:
        return [job(i) for i in range(trials)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job, range(trials), chunksize=max(1, trials // (4 * workers))))


def summarize(results: list[dict]) -> dict[str, TrialSummary]:
    """Aggregate {procedure: TrialTrace} trial results per procedure."""
    names = list(results[0])
    return {name: monte_carlo_aggregate([r[name] for r in results]) for name in names}


def power_difference(results: list[dict], a: str, b: str, t: int | None = None) -> tuple[float, float]:
    """Mean and paired standard error of power(a) - power(b) at horizon t."""
    idx = -1 if t is None else t - 1
    d = np.array([r[a].power_path()[idx] - r[b].power_path()[idx] for r in results])
    se = d.std(ddof=1) / np.sqrt(len(d)) if len(d) > 1 else 0.0
    return float(d.mean()), float(se)
