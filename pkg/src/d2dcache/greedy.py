"""Half-approximate placement by greedy submodular maximization.

Placing single segments one at a time turns the problem into maximizing a
monotone submodular set function over a partition matroid (at most C
segments per user), for which the greedy rule is a 1/2-approximation.  The
gain of caching one more segment of file f at user j has a closed form: a
popularity-weighted sum over requesting users i of
``Pr[enough contacts with j to fetch the new segment]`` times
``Pr[the rest of the network leaves the threshold unmet without it]``.

Because that gain depends only on the per-(user, file) counts, the working
set is represented by the count matrix itself rather than by explicit
segment elements.  After each pick only the chosen file's priorities can
change, so at most one priority per user is recomputed per iteration; a
per-file running maximum keeps the argmax search cheap.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .model import Placement, Scenario
from .objective import _convolve_cdf, offloading_ratio, poisson_tail, segment_pmf

__all__ = ["GreedyPick", "GreedyState", "greedy_place", "marginal_gain", "poisson_tail", "write_pick_trace"]


def marginal_gain(scenario: Scenario, counts: np.ndarray, j: int, f: int) -> float:
    """Objective increase from caching one more segment of file f at user j.

    Requires x_{j,f} < K_f and spare capacity at user j.  Equals the exact
    finite difference of the offloading ratio.
    """
    counts = np.asarray(counts, dtype=int)
    lib = scenario.library
    k_f = int(lib.threshold[f])
    x_jf = int(counts[j, f])
    if x_jf >= k_f:
        raise ValueError("user already holds the full recovery threshold of this file")
    if counts[j].sum() >= scenario.capacity:
        raise ValueError("user has no spare cache capacity")
    rates = scenario.contact_rate
    budgets = scenario.budget
    deadline = scenario.deadline
    n = scenario.n_users
    total = 0.0
    for i in range(n):
        if i == j:
            p1 = 1.0  # own cache is always reachable
        else:
            needed = math.ceil((x_jf + 1) / int(budgets[i, j]))
            p1 = poisson_tail(rates[i, j] * deadline, needed)
            if p1 == 0.0:
                continue
        cap = k_f - x_jf - 1
        if i != j:
            cap -= int(counts[i, f])  # requester's own segments are certain
        if cap < 0:
            continue
        masses = [
            segment_pmf(rates[i, jp], deadline, int(budgets[i, jp]), int(counts[jp, f])).mass
            for jp in range(n)
            if jp != j and jp != i and counts[jp, f] > 0 and rates[i, jp] > 0
        ]
        p2 = float(_convolve_cdf(masses, cap)[cap])
        total += p1 * p2
    return float(lib.popularity[f]) / (n * k_f) * total


@dataclass(frozen=True)
class GreedyPick:
    iteration: int
    user: int
    file: int
    gain: float
    cumulative: float


@dataclass
class GreedyState:
    """Incremental greedy bookkeeping.

    ``priority[j, f]`` caches the gain of the next segment of file f at user
    j (-inf once the pair is saturated or the user's cache is full);
    ``best_value``/``best_user`` hold the per-file maximum and its smallest
    attaining user.
    """

    counts: np.ndarray
    eligible: np.ndarray
    priority: np.ndarray
    best_value: np.ndarray = field(init=False)
    best_user: np.ndarray = field(init=False)

    def __post_init__(self):
        self.best_value = np.full(self.priority.shape[1], -np.inf)
        self.best_user = np.zeros(self.priority.shape[1], dtype=int)
        for f in range(self.priority.shape[1]):
            self.refresh_file_max(f)

    def refresh_file_max(self, f: int) -> None:
        col = self.priority[:, f]
        j = int(np.argmax(col))  # first occurrence = smallest user
        self.best_value[f] = col[j]
        self.best_user[f] = j


def _init_state(scenario: Scenario) -> GreedyState:
    n, n_files = scenario.n_users, scenario.n_files
    counts = np.zeros((n, n_files), dtype=int)
    eligible = np.full(n, scenario.capacity >= 1)
    priority = np.empty((n, n_files))
    for j in range(n):
        for f in range(n_files):
            priority[j, f] = marginal_gain(scenario, counts, j, f)
    return GreedyState(counts=counts, eligible=eligible, priority=priority)


def greedy_place(scenario: Scenario):
    """Greedy placement; returns (Placement, objective value, pick trace).

    Segments are added one at a time at the currently largest priority, ties
    resolved toward the smallest (file, user) pair; elements with zero gain
    are still placed while capacity remains.  The loop ends when N_u * C
    segments are placed or no eligible (user, file) pair is left.
    """
    state = _init_state(scenario)
    n, n_files = scenario.n_users, scenario.n_files
    capacity = scenario.capacity
    trace: list[GreedyPick] = []
    cumulative = 0.0
    target = n * capacity
    for iteration in range(1, target + 1):
        f_star = int(np.argmax(state.best_value))  # first max = smallest file
        gain = float(state.best_value[f_star])
        if gain == -np.inf:
            break
        j_star = int(state.best_user[f_star])
        cumulative += gain
        trace.append(GreedyPick(iteration, j_star, f_star, gain, cumulative))
        state.counts[j_star, f_star] += 1
        user_full = state.counts[j_star].sum() >= capacity
        if user_full:
            state.eligible[j_star] = False
            state.priority[j_star, :] = -np.inf
        elif state.counts[j_star, f_star] >= scenario.library.threshold[f_star]:
            state.priority[j_star, f_star] = -np.inf
        # only the chosen file's gains change; other files see the same counts
        for j in range(n):
            if state.eligible[j] and state.counts[j, f_star] < scenario.library.threshold[f_star]:
                state.priority[j, f_star] = marginal_gain(scenario, state.counts, j, f_star)
        state.refresh_file_max(f_star)
        if user_full:
            for f in range(n_files):
                if f != f_star and state.best_user[f] == j_star:
                    state.refresh_file_max(f)
    placement = Placement(counts=state.counts)
    return placement, offloading_ratio(scenario, placement), trace


def write_pick_trace(trace, path) -> None:
    """Write a greedy pick trace as CSV: iteration, user, file, gain, cumulative."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "user", "file", "gain", "cumulative_value"])
        for pick in trace:
            writer.writerow([pick.iteration, pick.user, pick.file, repr(pick.gain), repr(pick.cumulative)])
