"""Independent oracles and instance generators shared across the test suite.

Everything here deliberately avoids the library's convolution/log-space code
paths: probabilities come from scipy.stats and expectations from explicit
enumeration, so agreement with the package is a genuine cross-check.
"""

import itertools
import math

import numpy as np
from scipy import stats

from d2dcache.model import FileLibrary, Placement, Scenario, generate_scenario


def segment_value_dist(rate, deadline, b, x):
    """[(value, prob)] for V = min(b*M, x), truncating M at ceil(x/b).

    The truncation is exact because V saturates at x for every larger M.
    """
    if x == 0:
        return [(0, 1.0)]
    if math.isinf(rate):
        return [(x, 1.0)]
    mean = rate * deadline
    m_max = math.ceil(x / b)
    out = [(min(b * m, x), float(stats.poisson.pmf(m, mean))) for m in range(m_max)]
    out.append((x, float(stats.poisson.sf(m_max - 1, mean))))
    return out


def brute_force_ratio(scenario, placement):
    """Offloading ratio by enumerating all joint segment-delivery outcomes."""
    n, n_files = scenario.n_users, scenario.n_files
    counts = placement.counts
    total = 0.0
    for i in range(n):
        for f in range(n_files):
            k_f = int(scenario.library.threshold[f])
            p_f = float(scenario.library.popularity[f])
            dists = []
            for j in range(n):
                if j == i:
                    dists.append([(int(counts[j, f]), 1.0)])
                else:
                    dists.append(
                        segment_value_dist(
                            scenario.contact_rate[i, j],
                            scenario.deadline,
                            int(scenario.budget[i, j]),
                            int(counts[j, f]),
                        )
                    )
            expected = 0.0
            for combo in itertools.product(*dists):
                prob = math.prod(c[1] for c in combo)
                expected += min(sum(c[0] for c in combo), k_f) * prob
            total += p_f * expected / k_f
    return total / n


def single_user_scenario(popularity, thresholds, capacity, deadline=60.0):
    """One-user instance (only the self-cache matters)."""
    library = FileLibrary(popularity=popularity, threshold=thresholds)
    return Scenario(
        contact_rate=np.array([[math.inf]]),
        budget=np.ones((1, 1), dtype=int),
        deadline=deadline,
        capacity=capacity,
        library=library,
    )


def two_user_scenario(rate, popularity, thresholds, capacity, deadline=1.0, budget=1):
    library = FileLibrary(popularity=popularity, threshold=thresholds)
    rates = np.array([[math.inf, rate], [rate, math.inf]])
    return Scenario(
        contact_rate=rates,
        budget=np.full((2, 2), budget, dtype=int),
        deadline=deadline,
        capacity=capacity,
        library=library,
    )


def random_instance(rng, max_users=4, max_files=3, max_capacity=3, max_k=3,
                    rate_scale_range=(0.5, 4.0), max_budget=2):
    """Random small scenario with contact rates in a non-degenerate regime.

    The rate-scale range is relative to the reference Gamma(4.43, 1/1088)
    draw, which keeps rate*deadline around one so delivery probabilities stay
    interior.
    """
    n = int(rng.integers(2, max_users + 1))
    n_files = int(rng.integers(1, max_files + 1))
    return generate_scenario(
        n_users=n,
        n_files=n_files,
        gamma_r=float(rng.uniform(0.0, 1.2)),
        k_max=int(rng.integers(1, max_k + 1)),
        capacity=int(rng.integers(1, max_capacity + 1)),
        deadline=120.0,
        rate_shape=4.43,
        rate_scale=float(rng.uniform(*rate_scale_range)) / 1088.0,
        budget=int(rng.integers(1, max_budget + 1)),
        seed=int(rng.integers(2**31)),
    )


def random_feasible_counts(rng, scenario, fill=None):
    """Random feasible placement; ``fill`` caps the number of placed segments."""
    n, n_files = scenario.n_users, scenario.n_files
    counts = np.zeros((n, n_files), dtype=int)
    budget = n * scenario.capacity if fill is None else fill
    for _ in range(int(rng.integers(0, budget + 1))):
        j = int(rng.integers(n))
        f = int(rng.integers(n_files))
        if counts[j].sum() < scenario.capacity and counts[j, f] < scenario.library.threshold[f]:
            counts[j, f] += 1
    return counts


def eligible_pairs(scenario, counts):
    """(user, file) pairs where one more segment can legally be cached."""
    return [
        (j, f)
        for j in range(scenario.n_users)
        for f in range(scenario.n_files)
        if counts[j].sum() < scenario.capacity
        and counts[j, f] < scenario.library.threshold[f]
    ]


def finite_difference_gain(scenario, counts, j, f):
    """Objective increase of one extra segment, via two full evaluations."""
    from d2dcache.objective import offloading_ratio

    before = offloading_ratio(scenario, Placement(counts=counts))
    after_counts = np.array(counts, dtype=int)
    after_counts[j, f] += 1
    after = offloading_ratio(scenario, Placement(counts=after_counts))
    return after - before
