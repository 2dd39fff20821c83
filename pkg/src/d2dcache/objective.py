"""Exact evaluation of the data offloading ratio.

The number of segments of file f that user i can pull from user j within the
deadline is V = min(B * M, x), where M is the Poisson contact count, B the
per-contact segment budget, and x the segments of f cached at j.  The
offloading ratio sums, over users and files, the expected recovered fraction
E[min(sum_j V_j, K_f)] / K_f weighted by popularity.  The distribution of the
sum is built by convolving one V pmf at a time, which keeps the evaluation
quadratic in the number of users instead of exponential.

Poisson probabilities are computed in log space and exponentiated, and tails
as complemented partial pmf sums, so no special-function dependency is
needed and large rate*deadline products stay finite.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .model import ConstraintViolationError, Placement, Scenario, validate_placement

logger = logging.getLogger(__name__)

_CLAMP_LOG_THRESHOLD = 1e-9


def poisson_pmf(k: int, mean: float) -> float:
    """Pr[M = k] for M ~ Poisson(mean), via exponentiated log pmf."""
    if mean < 0:
        raise ValueError("Poisson mean must be non-negative")
    if k < 0:
        return 0.0
    if mean == 0.0:
        return 1.0 if k == 0 else 0.0
    return math.exp(k * math.log(mean) - mean - math.lgamma(k + 1))


def poisson_tail(mean: float, n: int) -> float:
    """Pr[M >= n] for M ~ Poisson(mean).

    Computed as 1 minus the partial pmf sum up to n-1 (log-space terms), then
    clamped into [0, 1].  An infinite mean means contacts are certain, so the
    tail is 1 for every n.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    if n == 0:
        return 1.0
    if math.isinf(mean):
        return 1.0
    if mean < 0:
        raise ValueError("Poisson mean must be non-negative")
    head = math.fsum(poisson_pmf(m, mean) for m in range(n))
    return _clamp_probability(1.0 - head, "poisson_tail")


def _clamp_probability(p: float, where: str) -> float:
    if p < 0.0:
        if p < -_CLAMP_LOG_THRESHOLD:
            logger.warning("clamping %s=%r up to 0", where, p)
        return 0.0
    if p > 1.0:
        if p > 1.0 + _CLAMP_LOG_THRESHOLD:
            logger.warning("clamping %s=%r down to 1", where, p)
        return 1.0
    return p


@dataclass(frozen=True)
class SegmentPmf:
    """Distribution of V = min(B*M, x): segments deliverable by one user.

    ``mass[z] = Pr[V = z]`` for z = 0..support_max, where support_max is the
    cached count x.  Interior mass sits only on multiples of the per-contact
    budget; the point z = x absorbs the Poisson tail.
    """

    support_max: int
    mass: np.ndarray

    def __post_init__(self):
        arr = np.array(self.mass, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "mass", arr)
        if arr.shape != (self.support_max + 1,):
            raise ValueError("mass must have length support_max + 1")


def segment_pmf(rate: float, deadline: float, b: int, x: int) -> SegmentPmf:
    """Pmf of V = min(b*M, x) for contact count M ~ Poisson(rate*deadline).

    Interior points z < x carry Poisson mass only when z is a multiple of b
    (z/b contacts deliver exactly z segments); the saturation point z = x
    carries Pr[M >= ceil(x/b)].  An infinite rate (self access) or x = 0
    collapses to a point mass.
    """
    if rate < 0:
        raise ValueError("contact rate must be non-negative")
    if b < 1:
        raise ValueError("per-contact budget must be >= 1")
    if x < 0:
        raise ValueError("cached segment count must be non-negative")
    mass = np.zeros(x + 1)
    if x == 0:
        mass[0] = 1.0
        return SegmentPmf(support_max=0, mass=mass)
    if math.isinf(rate):
        mass[x] = 1.0
        return SegmentPmf(support_max=x, mass=mass)
    mean = rate * deadline
    for z in range(0, x, b):
        mass[z] = poisson_pmf(z // b, mean)
    mass[x] = poisson_tail(mean, math.ceil(x / b))
    return SegmentPmf(support_max=x, mass=mass)


@dataclass(frozen=True)
class SumCdfTable:
    """Running cdf of partial sums: ``rows[J, k] = Pr[V_1 + .. + V_J <= k]``.

    Row 0 is all ones (the empty sum is 0); each later row convolves one more
    segment pmf into the previous row.
    """

    k_prime: int
    rows: np.ndarray

    def __post_init__(self):
        arr = np.array(self.rows, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "rows", arr)

    @property
    def final(self) -> np.ndarray:
        return self.rows[-1]


def _convolve_cdf(masses, k_prime: int) -> np.ndarray:
    """Cdf of the sum of independent pmfs, truncated to 0..k_prime."""
    row = np.ones(k_prime + 1)
    for mass in masses:
        row = np.convolve(mass, row)[: k_prime + 1]
    np.clip(row, 0.0, 1.0, out=row)
    return row


def sum_cdf(pmfs, k_prime: int) -> SumCdfTable:
    """Build the full table of partial-sum cdfs for a list of SegmentPmf.

    The final row gives Pr[sum of all V_j <= k] for k = 0..k_prime.  Runs in
    O(len(pmfs) * k_prime^2) time in the worst case.
    """
    if k_prime < 0:
        raise ValueError("k_prime must be non-negative")
    rows = np.ones((len(pmfs) + 1, k_prime + 1))
    for j, pmf in enumerate(pmfs, start=1):
        conv = np.convolve(pmf.mass, rows[j - 1])[: k_prime + 1]
        bad = max(float(-conv.min()), float(conv.max() - 1.0))
        if bad > _CLAMP_LOG_THRESHOLD:
            logger.warning("clamping sum_cdf row %d entries by up to %r", j, bad)
        rows[j] = np.clip(conv, 0.0, 1.0)
    return SumCdfTable(k_prime=k_prime, rows=rows)


def _expected_min(cdf_row: np.ndarray, k: int) -> float:
    # E[min(S, k)] = sum_{q<k} q Pr[S=q] + k (1 - Pr[S <= k-1]), k >= 1
    e = 0.0
    prev = 0.0
    for q in range(k):
        e += q * (cdf_row[q] - prev)
        prev = cdf_row[q]
    return e + k * (1.0 - cdf_row[k - 1])


def file_utility(scenario: Scenario, f: int, column: np.ndarray) -> float:
    """Offloading-ratio contribution of file f under per-user counts ``column``.

    Averages over requesting users i the expected recovered fraction of file
    f, weighted by its popularity.  The requester's own cache contributes its
    count deterministically, so the random sum runs over the other users with
    the recovery threshold shifted down accordingly.
    """
    column = np.asarray(column, dtype=int)
    n = scenario.n_users
    lib = scenario.library
    k_f = int(lib.threshold[f])
    p_f = float(lib.popularity[f])
    if column.shape != (n,):
        raise ValueError("column length must equal the number of users")
    if np.any(column < 0) or np.any(column > k_f):
        raise ValueError("column entries must lie in [0, K_f]")
    rates = scenario.contact_rate
    budgets = scenario.budget
    deadline = scenario.deadline
    total = 0.0
    for i in range(n):
        x_self = int(column[i])
        k_eff = k_f - x_self
        if k_eff <= 0:
            total += 1.0  # own cache alone recovers the file
            continue
        masses = [
            segment_pmf(rates[i, j], deadline, int(budgets[i, j]), int(column[j])).mass
            for j in range(n)
            if j != i and column[j] > 0 and rates[i, j] > 0
        ]
        cdf = _convolve_cdf(masses, k_eff - 1)
        total += (x_self + _expected_min(cdf, k_eff)) / k_f
    return p_f * total / n


def offloading_ratio(scenario: Scenario, placement: Placement) -> float:
    """Expected fraction of requested data served over D2D links.

    Raises ConstraintViolationError (carrying the violation list) if the
    placement is infeasible for the scenario.
    """
    violations = validate_placement(placement, scenario)
    if violations:
        raise ConstraintViolationError(violations)
    counts = placement.counts
    return float(
        sum(file_utility(scenario, f, counts[:, f]) for f in range(scenario.n_files))
    )
