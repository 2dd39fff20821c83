"""Optimal placement via stage-per-file dynamic programming.

Each file is a stage; a state is the vector of remaining cache capacities.
The best value for the first m files under a remaining-capacity vector is the
max over this file's allocations of its utility plus the best value for the
first m-1 files under the reduced capacities.  Stage 1 needs no search: with
a single file, filling every user's remaining space (up to the recovery
threshold) is optimal.  Per-stage tables are kept so the winning placement
can be reconstructed by walking the chosen allocations backwards.

An exhaustive-search comparator over all feasible matrices is included as
the correctness oracle for small instances.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .model import Placement, Scenario
from .objective import file_utility

DEFAULT_STATE_LIMIT = 2**24
EXHAUSTIVE_COMBO_LIMIT = 10**7


class ResourceLimitError(Exception):
    """The instance exceeds a configured enumeration limit."""


@dataclass(frozen=True)
class CapacityState:
    """Remaining cache capacities of all users, with a mixed-radix index."""

    remaining: tuple
    index: int


def encode_state(remaining, capacity: int) -> int:
    """Mixed-radix code of a remaining-capacity vector: sum_j c_j (C+1)^j."""
    code = 0
    for j, c in enumerate(remaining):
        if not 0 <= c <= capacity:
            raise ValueError("remaining capacities must lie in [0, C]")
        code += c * (capacity + 1) ** j
    return code


def decode_state(index: int, capacity: int, n_users: int) -> CapacityState:
    """Inverse of :func:`encode_state` over the (C+1)^n state space."""
    if not 0 <= index < (capacity + 1) ** n_users:
        raise ValueError("state index out of range")
    digits = []
    rest = index
    for _ in range(n_users):
        # user 0 is the least-significant digit
        rest, digit = divmod(rest, capacity + 1)
        digits.append(digit)
    return CapacityState(remaining=tuple(digits), index=index)


@dataclass(frozen=True)
class StageTable:
    """Per-stage DP table over the dense capacity-state grid.

    ``values[state]`` is the best objective for this stage's file prefix;
    ``choice[state]`` indexes into ``allocations`` for the winning per-user
    allocation of this stage's file (-1 for stage 1, where the allocation is
    the deterministic fill rule).
    """

    stage: int
    values: np.ndarray
    choice: np.ndarray
    allocations: list


def _stage_utilities(scenario: Scenario, f: int, allocations) -> np.ndarray:
    cache = {}
    out = np.empty(len(allocations))
    for idx, alloc in enumerate(allocations):
        val = cache.get(alloc)
        if val is None:
            val = file_utility(scenario, f, np.asarray(alloc, dtype=int))
            cache[alloc] = val
        out[idx] = val
    return out


def _first_stage(scenario: Scenario) -> np.ndarray:
    """OPT over all states for the single-file prefix: fill rule min(K_1, c_j)."""
    n = scenario.n_users
    cap = scenario.capacity
    k1 = int(scenario.library.threshold[0])
    shape = (cap + 1,) * n
    grid = np.minimum(np.indices(shape), k1)  # allocation digit per user, per state
    flat = grid.reshape(n, -1)
    values = np.empty(flat.shape[1])
    cache = {}
    for s in range(flat.shape[1]):
        alloc = tuple(int(v) for v in flat[:, s])
        val = cache.get(alloc)
        if val is None:
            val = file_utility(scenario, 0, np.asarray(alloc, dtype=int))
            cache[alloc] = val
        values[s] = val
    return values.reshape(shape)


def _transition(prev: np.ndarray, utilities: np.ndarray, allocations, cap: int):
    """One DP stage: best over allocations of U(alloc) + prev[state - alloc].

    Allocations are scanned in odometer order and ties keep the first-found
    maximum, so the result is deterministic.
    """
    best = np.full(prev.shape, -np.inf)
    choice = np.full(prev.shape, -1, dtype=np.int32)
    for aid, alloc in enumerate(allocations):
        dst = tuple(slice(a, cap + 1) for a in alloc)
        src = tuple(slice(0, cap + 1 - a) for a in alloc)
        cand = utilities[aid] + prev[src]
        dst_best = best[dst]
        dst_choice = choice[dst]
        mask = cand > dst_best
        dst_best[mask] = cand[mask]
        dst_choice[mask] = aid
    return best, choice


def dp_stage_tables(scenario: Scenario, state_limit: int = DEFAULT_STATE_LIMIT) -> list[StageTable]:
    """Full DP tables for every stage (used by dp_optimal and for inspection)."""
    n = scenario.n_users
    cap = scenario.capacity
    n_states = (cap + 1) ** n
    if n_states > state_limit:
        raise ResourceLimitError(
            f"state-space size (C+1)^N_u = {n_states} exceeds the limit {state_limit}"
        )
    tables = [
        StageTable(stage=1, values=_first_stage(scenario), choice=np.full((cap + 1,) * n, -1, dtype=np.int32), allocations=[])
    ]
    for m in range(2, scenario.n_files + 1):
        f = m - 1
        k_f = int(scenario.library.threshold[f])
        allocations = list(itertools.product(range(min(k_f, cap) + 1), repeat=n))
        utilities = _stage_utilities(scenario, f, allocations)
        values, choice = _transition(tables[-1].values, utilities, allocations, cap)
        tables.append(StageTable(stage=m, values=values, choice=choice, allocations=allocations))
    return tables


def dp_optimal(scenario: Scenario, state_limit: int = DEFAULT_STATE_LIMIT):
    """Optimal placement and its objective value.

    Raises ResourceLimitError when the (C+1)^N_u state space exceeds
    ``state_limit``.
    """
    tables = dp_stage_tables(scenario, state_limit=state_limit)
    n = scenario.n_users
    cap = scenario.capacity
    counts = np.zeros((n, scenario.n_files), dtype=int)
    state = (cap,) * n
    value = float(tables[-1].values[state])
    for table in reversed(tables[1:]):
        alloc = table.allocations[int(table.choice[state])]
        counts[:, table.stage - 1] = alloc
        state = tuple(c - a for c, a in zip(state, alloc))
    k1 = int(scenario.library.threshold[0])
    counts[:, 0] = np.minimum(k1, state)
    return Placement(counts=counts), value


def _feasible_rows(thresholds, capacity: int) -> list[tuple]:
    ranges = [range(min(int(k), capacity) + 1) for k in thresholds]
    return [row for row in itertools.product(*ranges) if sum(row) <= capacity]


def exhaustive_search(scenario: Scenario, combo_limit: int = EXHAUSTIVE_COMBO_LIMIT):
    """Global optimum by enumerating every feasible placement matrix.

    Only viable for tiny instances; ties are broken toward the
    lexicographically smallest matrix (row-major).  Raises
    ResourceLimitError when the enumeration would exceed ``combo_limit``
    matrices.
    """
    n = scenario.n_users
    rows = _feasible_rows(scenario.library.threshold, scenario.capacity)
    n_combos = len(rows) ** n
    if n_combos > combo_limit:
        raise ResourceLimitError(
            f"exhaustive search would enumerate {n_combos} placements, over the limit {combo_limit}"
        )
    utility_cache = [dict() for _ in range(scenario.n_files)]

    def column_utility(f: int, col: tuple) -> float:
        val = utility_cache[f].get(col)
        if val is None:
            val = file_utility(scenario, f, np.asarray(col, dtype=int))
            utility_cache[f][col] = val
        return val

    best_value = -np.inf
    best_matrix = None
    for matrix in itertools.product(rows, repeat=n):
        value = sum(
            column_utility(f, tuple(row[f] for row in matrix))
            for f in range(scenario.n_files)
        )
        if value > best_value:
            best_value = value
            best_matrix = matrix
    return Placement(counts=np.asarray(best_matrix, dtype=int)), float(best_value)
