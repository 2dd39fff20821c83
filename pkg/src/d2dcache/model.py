"""Problem-instance data types, validation, and synthetic scenario generation.

A caching scenario consists of a set of mobile users whose pairwise meetings
form independent Poisson processes, a library of fountain-coded files, and
per-user cache capacities.  The diagonal of the contact-rate matrix carries
``math.inf`` as the self-access marker: a user can always read its own cache,
and downstream probability code branches on the marker instead of plugging a
huge rate into Poisson terms.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

INFINITE_RATE = math.inf


class ConstraintViolationError(Exception):
    """A placement violates the scenario's feasibility constraints."""

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(str(v) for v in self.violations)
        super().__init__(f"infeasible placement: {lines}")


@dataclass(frozen=True)
class Violation:
    """One violated feasibility constraint.

    ``kind`` is ``"capacity"`` (a user's cached segments exceed its cache
    size) or ``"threshold"`` (more segments of a file than are needed to
    recover it).  ``file`` is None for capacity violations.
    """

    kind: str
    user: int
    file: int | None = None

    def __str__(self):
        if self.file is None:
            return f"{self.kind}(user={self.user})"
        return f"{self.kind}(user={self.user}, file={self.file})"


def _frozen_array(values, dtype):
    # always copy so freezing never reaches back into the caller's array
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class FileLibrary:
    """Content library: request popularity and recovery thresholds.

    Parameters
    ----------
    popularity : array-like of float
        Request probability of each file; non-negative, sums to 1.
    threshold : array-like of int
        Number of distinct coded segments needed to recover each file (>= 1).
    """

    popularity: np.ndarray
    threshold: np.ndarray

    def __post_init__(self):
        pop = _frozen_array(self.popularity, float)
        thr = _frozen_array(self.threshold, int)
        object.__setattr__(self, "popularity", pop)
        object.__setattr__(self, "threshold", thr)
        if pop.ndim != 1 or thr.shape != pop.shape or pop.size == 0:
            raise ValueError("popularity and threshold must be 1-D vectors of equal positive length")
        if np.any(pop < 0):
            raise ValueError("popularity entries must be non-negative")
        if abs(float(pop.sum()) - 1.0) > 1e-12:
            raise ValueError(f"popularity must sum to 1 (got {pop.sum()!r})")
        if np.any(thr < 1):
            raise ValueError("every recovery threshold must be >= 1")

    @property
    def n_files(self) -> int:
        return self.popularity.size

    @property
    def k_max(self) -> int:
        return int(self.threshold.max())


@dataclass(frozen=True)
class Scenario:
    """Full problem instance.

    Parameters
    ----------
    contact_rate : (n, n) array of float
        Symmetric pairwise contact rates in contacts per second; the diagonal
        must hold the infinite self-access marker (``math.inf``).
    budget : (n, n) array of int
        ``budget[i, j]`` segments can be transferred from user j to user i in
        one contact; all entries >= 1 (zero-budget links are rejected).
    deadline : float
        Delivery deadline in seconds.
    capacity : int
        Per-user cache capacity in segments.
    library : FileLibrary
    """

    contact_rate: np.ndarray
    budget: np.ndarray
    deadline: float
    capacity: int
    library: FileLibrary

    def __post_init__(self):
        rates = _frozen_array(self.contact_rate, float)
        budget = _frozen_array(self.budget, int)
        object.__setattr__(self, "contact_rate", rates)
        object.__setattr__(self, "budget", budget)
        n = rates.shape[0] if rates.ndim == 2 else 0
        if rates.ndim != 2 or rates.shape != (n, n) or n < 1:
            raise ValueError("contact_rate must be a square matrix")
        if budget.shape != (n, n):
            raise ValueError("budget must match contact_rate shape")
        off = ~np.eye(n, dtype=bool)
        if np.any(rates[off] < 0):
            raise ValueError("off-diagonal contact rates must be non-negative")
        if not np.array_equal(rates, rates.T):
            raise ValueError("contact_rate must be symmetric")
        if not np.all(np.isinf(np.diag(rates))):
            raise ValueError("contact_rate diagonal must carry the infinite self-access marker")
        if np.any(budget < 1):
            raise ValueError("per-contact budgets must be >= 1")
        if self.deadline <= 0:
            raise ValueError("deadline must be positive")
        if self.capacity < 1:
            raise ValueError("capacity must be a positive integer")

    @property
    def n_users(self) -> int:
        return self.contact_rate.shape[0]

    @property
    def n_files(self) -> int:
        return self.library.n_files


@dataclass(frozen=True)
class Placement:
    """Cached segment counts: ``counts[j, f]`` segments of file f at user j.

    Construction only requires a non-negative integer matrix; feasibility
    against a scenario's capacity and thresholds is checked separately by
    :func:`validate_placement`, so infeasible candidates can be represented.
    """

    counts: np.ndarray

    def __post_init__(self):
        counts = _frozen_array(self.counts, int)
        object.__setattr__(self, "counts", counts)
        if counts.ndim != 2:
            raise ValueError("counts must be a 2-D users x files matrix")
        if np.any(counts < 0):
            raise ValueError("segment counts must be non-negative")

    @property
    def n_users(self) -> int:
        return self.counts.shape[0]

    @property
    def n_files(self) -> int:
        return self.counts.shape[1]


@dataclass(frozen=True)
class LinkParams:
    """Physical link parameters used to derive a per-contact segment budget."""

    contact_duration: float
    rate_bps: float
    segment_bits: float

    def __post_init__(self):
        if self.contact_duration <= 0 or self.rate_bps <= 0 or self.segment_bits <= 0:
            raise ValueError("all link parameters must be strictly positive")


def derive_budget(link: LinkParams) -> int:
    """Segments transferable in one contact: floor(duration * rate / segment size).

    May return 0 for links too slow to move a single segment within one
    contact; such links must be rejected by the caller (scenarios require
    budgets >= 1).
    """
    return int(link.contact_duration * link.rate_bps // link.segment_bits)


def zipf_popularity(n_files: int, gamma_r: float) -> np.ndarray:
    """Zipf request probabilities over ranks 1..n_files with exponent gamma_r.

    Returns a vector summing to 1 that is non-increasing in rank; gamma_r = 0
    gives the uniform distribution.
    """
    if n_files < 1:
        raise ValueError("n_files must be >= 1")
    if gamma_r < 0:
        raise ValueError("gamma_r must be non-negative")
    ranks = np.arange(1, n_files + 1, dtype=float)
    weights = ranks ** -gamma_r
    return weights / weights.sum()


def sample_gamma_rates(n_users: int, shape: float, scale: float, seed: int) -> np.ndarray:
    """Symmetric contact-rate matrix with i.i.d. Gamma(shape, scale) pairs.

    Each unordered pair (i, j), i < j, gets an independent draw mirrored to
    (j, i); the diagonal carries the infinite self-access marker.  The same
    seed always yields the same matrix.
    """
    if n_users < 2:
        raise ValueError("n_users must be >= 2")
    if shape <= 0 or scale <= 0:
        raise ValueError("Gamma shape and scale must be positive")
    rng = np.random.default_rng(seed)
    rates = np.zeros((n_users, n_users))
    iu = np.triu_indices(n_users, k=1)
    draws = rng.gamma(shape, scale, size=iu[0].size)
    rates[iu] = draws
    rates += rates.T
    np.fill_diagonal(rates, INFINITE_RATE)
    return rates


def validate_placement(placement: Placement, scenario: Scenario) -> list[Violation]:
    """Check a placement against capacity and threshold constraints.

    Returns the (possibly empty) list of violations; an empty list means the
    placement is feasible.  Raises ValueError on dimension mismatch.
    """
    counts = placement.counts
    if counts.shape != (scenario.n_users, scenario.n_files):
        raise ValueError(
            f"placement shape {counts.shape} does not match scenario "
            f"({scenario.n_users} users, {scenario.n_files} files)"
        )
    violations = []
    row_sums = counts.sum(axis=1)
    for j in np.nonzero(row_sums > scenario.capacity)[0]:
        violations.append(Violation("capacity", int(j)))
    over = counts > scenario.library.threshold[np.newaxis, :]
    for j, f in zip(*np.nonzero(over)):
        violations.append(Violation("threshold", int(j), int(f)))
    return violations


def generate_scenario(
    n_users: int,
    n_files: int,
    gamma_r: float,
    k_max: int,
    capacity: int,
    deadline: float,
    rate_shape: float,
    rate_scale: float,
    budget: int,
    seed: int,
) -> Scenario:
    """Assemble a synthetic scenario: Zipf popularity, Gamma contact rates,
    recovery thresholds uniform on [1, k_max], and a constant per-contact
    budget."""
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    if budget < 1:
        raise ValueError("budget must be >= 1")
    popularity = zipf_popularity(n_files, gamma_r)
    rates = sample_gamma_rates(n_users, rate_shape, rate_scale, seed)
    thr_rng = np.random.default_rng([seed, 1])
    thresholds = thr_rng.integers(1, k_max + 1, size=n_files)
    budgets = np.full((n_users, n_users), budget, dtype=int)
    library = FileLibrary(popularity=popularity, threshold=thresholds)
    return Scenario(
        contact_rate=rates,
        budget=budgets,
        deadline=float(deadline),
        capacity=int(capacity),
        library=library,
    )


# ---------------------------------------------------------------------------
# JSON serialization.  Matrices are row-major lists; the rate diagonal is
# written as the string "inf", which is the only place that string is legal.
# ---------------------------------------------------------------------------


def _encode_rates(rates: np.ndarray) -> list[list]:
    out = []
    for i, row in enumerate(rates):
        out.append(["inf" if j == i else float(v) for j, v in enumerate(row)])
    return out


def _decode_rates(rows: list[list]) -> np.ndarray:
    n = len(rows)
    rates = np.zeros((n, n))
    for i, row in enumerate(rows):
        if len(row) != n:
            raise ValueError("rates matrix must be square")
        for j, v in enumerate(row):
            if isinstance(v, str):
                if v != "inf" or i != j:
                    raise ValueError('the string "inf" is only permitted on the rate diagonal')
                rates[i, j] = INFINITE_RATE
            else:
                if i == j:
                    raise ValueError('rate diagonal entries must be the string "inf"')
                rates[i, j] = float(v)
    return rates


def scenario_to_dict(scenario: Scenario) -> dict:
    return {
        "n_users": scenario.n_users,
        "deadline_s": scenario.deadline,
        "capacity": scenario.capacity,
        "rates": _encode_rates(scenario.contact_rate),
        "budgets": scenario.budget.tolist(),
        "files": {
            "popularity": scenario.library.popularity.tolist(),
            "thresholds": scenario.library.threshold.tolist(),
        },
    }


def scenario_from_dict(doc: dict) -> Scenario:
    try:
        library = FileLibrary(
            popularity=doc["files"]["popularity"],
            threshold=doc["files"]["thresholds"],
        )
        scenario = Scenario(
            contact_rate=_decode_rates(doc["rates"]),
            budget=np.asarray(doc["budgets"], dtype=int),
            deadline=float(doc["deadline_s"]),
            capacity=int(doc["capacity"]),
            library=library,
        )
    except KeyError as exc:
        raise ValueError(f"scenario document missing field {exc}") from exc
    if scenario.n_users != int(doc["n_users"]):
        raise ValueError("n_users does not match the rate matrix dimension")
    return scenario


def save_scenario(scenario: Scenario, path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(scenario), indent=2, sort_keys=True) + "\n")


def load_scenario(path) -> Scenario:
    return scenario_from_dict(json.loads(Path(path).read_text()))


def save_placement(placement: Placement, path) -> None:
    doc = {
        "n_users": placement.n_users,
        "n_files": placement.n_files,
        "counts": placement.counts.tolist(),
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_placement(path) -> Placement:
    doc = json.loads(Path(path).read_text())
    return Placement(counts=np.asarray(doc["counts"], dtype=int))
