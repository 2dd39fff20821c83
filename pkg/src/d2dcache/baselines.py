"""Reference placement strategies: popularity-ranked and randomized caching."""

from __future__ import annotations

import numpy as np

from .model import Placement, Scenario


def popular_place(scenario: Scenario) -> Placement:
    """Every user caches segments of the most popular files, capacity first.

    Files are visited in descending popularity (ties toward the smaller
    index); each takes min(threshold, remaining capacity) segments.  The
    result ignores contact rates entirely.
    """
    lib = scenario.library
    order = np.argsort(-lib.popularity, kind="stable")
    row = np.zeros(lib.n_files, dtype=int)
    remaining = scenario.capacity
    for f in order:
        if remaining == 0:
            break
        take = min(int(lib.threshold[f]), remaining)
        row[f] = take
        remaining -= take
    counts = np.tile(row, (scenario.n_users, 1))
    return Placement(counts=counts)


def random_place(scenario: Scenario, seed: int) -> Placement:
    """Each user caches segments drawn proportionally to file popularity.

    Per user, C single-segment draws are made over the files still below
    their recovery threshold, renormalizing the popularity over that set
    each time (uniform fallback if the eligible mass is zero); drawing stops
    early once every file is saturated.  Per-user streams are derived from
    (seed, user), so output is deterministic per seed.
    """
    lib = scenario.library
    n, n_files = scenario.n_users, lib.n_files
    counts = np.zeros((n, n_files), dtype=int)
    for j in range(n):
        rng = np.random.default_rng([seed, j])
        for _ in range(scenario.capacity):
            open_files = np.nonzero(counts[j] < lib.threshold)[0]
            if open_files.size == 0:
                break
            weights = lib.popularity[open_files]
            mass = weights.sum()
            if mass > 0:
                f = int(rng.choice(open_files, p=weights / mass))
            else:
                f = int(rng.choice(open_files))
            counts[j, f] += 1
    return Placement(counts=counts)
