"""Empirical validation: Monte Carlo replay of the Poisson contact model,
contact-trace handling, random-waypoint trace generation, and rate
estimation from observed contacts.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import INFINITE_RATE, ConstraintViolationError, Placement, Scenario, validate_placement

# Trials are drawn in fixed-size blocks with per-block RNG streams derived
# from (seed, block index), so results do not depend on how blocks are
# scheduled across workers.
_TRIAL_BLOCK = 4096


@dataclass(frozen=True)
class McEstimate:
    """Monte Carlo estimate of an offloading ratio: mean, stderr, trials."""

    mean: float
    std_error: float
    trials: int

    def __post_init__(self):
        if not 0.0 <= self.mean <= 1.0:
            raise ValueError("estimated ratio must lie in [0, 1]")
        if self.std_error < 0.0 or self.trials < 1:
            raise ValueError("need a non-negative stderr and at least one trial")


@dataclass(frozen=True)
class ContactTrace:
    """Timestamped pairwise contact records over an observation horizon.

    Pairs are stored undirected with user_a < user_b and records sorted by
    start time; 0 <= start_s <= end_s <= horizon.
    """

    user_a: np.ndarray
    user_b: np.ndarray
    start_s: np.ndarray
    end_s: np.ndarray
    horizon: float

    def __post_init__(self):
        a = np.asarray(self.user_a, dtype=int)
        b = np.asarray(self.user_b, dtype=int)
        start = np.asarray(self.start_s, dtype=float)
        end = np.asarray(self.end_s, dtype=float)
        if not (a.shape == b.shape == start.shape == end.shape):
            raise ValueError("trace record arrays must have equal length")
        if np.any(a == b):
            raise ValueError("contact records must involve two distinct users")
        lo = np.minimum(a, b)
        hi = np.maximum(a, b)
        order = np.argsort(start, kind="stable")
        for name, arr in (("user_a", lo), ("user_b", hi), ("start_s", start), ("end_s", end)):
            sorted_arr = arr[order]
            sorted_arr.setflags(write=False)
            object.__setattr__(self, name, sorted_arr)
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if start.size and (np.any(start < 0) or np.any(end < start) or np.any(end > self.horizon)):
            raise ValueError("records must satisfy 0 <= start <= end <= horizon")

    @property
    def n_records(self) -> int:
        return self.start_s.size


@dataclass(frozen=True)
class RwpParams:
    """Random-waypoint simulation parameters."""

    area_side_m: float
    tx_range_m: float
    n_users: int
    mean_velocity_mps: float
    duration_s: float
    seed: int

    def __post_init__(self):
        if min(self.area_side_m, self.tx_range_m, self.duration_s) <= 0 or self.n_users < 2:
            raise ValueError("area, range, and duration must be positive; need >= 2 users")
        if self.mean_velocity_mps < 0:
            raise ValueError("mean velocity must be non-negative")


def monte_carlo_ratio(scenario: Scenario, placement: Placement, trials: int, seed: int) -> McEstimate:
    """Estimate the offloading ratio by sampling Poisson contact counts.

    Per trial and per (requester, file), contact counts are drawn for every
    caching peer, segments capped by per-contact budgets and cached counts,
    and the recovered fraction accumulated; the estimate averages over
    trials and reports the standard error of that mean.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    violations = validate_placement(placement, scenario)
    if violations:
        raise ConstraintViolationError(violations)
    n = scenario.n_users
    counts = placement.counts
    lib = scenario.library
    deadline = scenario.deadline
    values = np.zeros(trials)
    for block_idx, lo in enumerate(range(0, trials, _TRIAL_BLOCK)):
        hi = min(lo + _TRIAL_BLOCK, trials)
        size = hi - lo
        rng = np.random.default_rng([seed, block_idx])
        acc = np.zeros(size)
        for i in range(n):
            for f in range(lib.n_files):
                k_f = int(lib.threshold[f])
                u = np.full(size, float(counts[i, f]))
                for j in range(n):
                    if j == i or counts[j, f] == 0:
                        continue
                    lam = scenario.contact_rate[i, j]
                    b = int(scenario.budget[i, j])
                    if math.isinf(lam):
                        u += counts[j, f]
                        continue
                    if lam == 0:
                        continue
                    m = rng.poisson(lam * deadline, size=size)
                    u += np.minimum(b * m, counts[j, f])
                acc += lib.popularity[f] * np.minimum(u, k_f) / k_f
        values[lo:hi] = acc / n
    mean = min(max(float(values.mean()), 0.0), 1.0)  # shave float overshoot
    std_error = float(values.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return McEstimate(mean=mean, std_error=std_error, trials=trials)


def _window_contact_counts(trace: ContactTrace, n_users: int, t0: float, t1: float) -> np.ndarray:
    mask = (trace.start_s >= t0) & (trace.start_s <= t1)
    counts = np.zeros((n_users, n_users), dtype=int)
    np.add.at(counts, (trace.user_a[mask], trace.user_b[mask]), 1)
    counts += counts.T
    return counts


def replay_ratio(
    placement: Placement,
    trace: ContactTrace,
    scenario: Scenario,
    request_epochs,
    seed: int,
) -> McEstimate:
    """Evaluate a placement against recorded contacts instead of the model.

    At each request epoch every user draws a file from the popularity
    distribution and collects segments from the peers it actually contacted
    within the deadline window; the per-epoch network averages form the
    sample.
    """
    epochs = [float(t) for t in request_epochs]
    if not epochs:
        raise ValueError("at least one request epoch is required")
    violations = validate_placement(placement, scenario)
    if violations:
        raise ConstraintViolationError(violations)
    n = scenario.n_users
    lib = scenario.library
    deadline = scenario.deadline
    for t0 in epochs:
        if t0 < 0 or t0 + deadline > trace.horizon:
            raise ValueError(f"epoch {t0} plus the deadline falls outside the trace horizon")
    counts = placement.counts
    values = np.zeros(len(epochs))
    for e_idx, t0 in enumerate(epochs):
        rng = np.random.default_rng([seed, e_idx])
        contact_counts = _window_contact_counts(trace, n, t0, t0 + deadline)
        acc = 0.0
        for i in range(n):
            f = int(rng.choice(lib.n_files, p=lib.popularity))
            k_f = int(lib.threshold[f])
            u = float(counts[i, f])
            for j in range(n):
                if j == i:
                    continue
                u += min(int(scenario.budget[i, j]) * contact_counts[i, j], int(counts[j, f]))
            acc += min(u, k_f) / k_f
        values[e_idx] = acc / n
    mean = min(max(float(values.mean()), 0.0), 1.0)
    std_error = float(values.std(ddof=1) / math.sqrt(len(epochs))) if len(epochs) > 1 else 0.0
    return McEstimate(mean=mean, std_error=std_error, trials=len(epochs))


def estimate_rates(trace: ContactTrace, n_users: int) -> np.ndarray:
    """Pairwise contact rates as observed contacts per second.

    Returns the symmetric matrix count(i, j) / horizon with the infinite
    self-access marker on the diagonal.
    """
    if trace.horizon <= 0:
        raise ValueError("trace horizon must be positive")
    counts = np.zeros((n_users, n_users))
    np.add.at(counts, (trace.user_a, trace.user_b), 1.0)
    counts += counts.T
    rates = counts / trace.horizon
    np.fill_diagonal(rates, INFINITE_RATE)
    return rates


def user_contact_rates(trace: ContactTrace, n_users: int) -> np.ndarray:
    """Per-user contact rate: contacts involving each user per second."""
    rates = estimate_rates(trace, n_users)
    off = rates.copy()
    np.fill_diagonal(off, 0.0)
    return off.sum(axis=1)


def network_contact_rate(trace: ContactTrace) -> float:
    """Network average contact rate: total contacts per second."""
    return trace.n_records / trace.horizon


def poisson_trace(rates: np.ndarray, horizon: float, seed: int) -> ContactTrace:
    """Synthetic trace with Poisson contact processes at the given rates.

    Each unordered pair gets Poisson(rate * horizon) instantaneous contacts
    placed uniformly over the horizon (the conditional law of a Poisson
    process given its count).  Useful for estimator consistency checks.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    rng = np.random.default_rng(seed)
    n = rates.shape[0]
    users_a, users_b, starts = [], [], []
    for i in range(n):
        for j in range(i + 1, n):
            lam = rates[i, j]
            if not math.isfinite(lam) or lam <= 0:
                continue
            k = int(rng.poisson(lam * horizon))
            if k == 0:
                continue
            times = rng.uniform(0.0, horizon, size=k)
            users_a.extend([i] * k)
            users_b.extend([j] * k)
            starts.extend(times.tolist())
    starts = np.asarray(starts, dtype=float)
    return ContactTrace(
        user_a=np.asarray(users_a, dtype=int),
        user_b=np.asarray(users_b, dtype=int),
        start_s=starts,
        end_s=starts.copy(),
        horizon=float(horizon),
    )


@dataclass(frozen=True)
class RwpRun:
    """A random-waypoint simulation output.

    ``user_velocity`` holds each user's realized average velocity (distance
    travelled over the duration), the measurable quantity that drives its
    contact opportunities.
    """

    trace: ContactTrace
    user_velocity: np.ndarray


def rwp_generate(params: RwpParams) -> ContactTrace:
    """Simulate random-waypoint motion and record pairwise contact intervals."""
    return rwp_simulate(params).trace


def rwp_simulate(params: RwpParams) -> RwpRun:
    """Random-waypoint simulation returning the trace plus realized velocities.

    Each user's velocity parameter is uniform on (0, 2 * mean velocity);
    every leg moves toward a uniformly random target at a speed redrawn
    uniformly on (0, 2 * user parameter).  A contact opens when a pair moves
    within transmission range and closes when it leaves.  The time step is
    sized well below the range over the fastest possible speed so crossings
    are not missed.
    """
    rng = np.random.default_rng(params.seed)
    n = params.n_users
    side = params.area_side_m
    pos = rng.uniform(0.0, side, size=(n, 2))
    v_user = rng.uniform(0.0, 2.0 * params.mean_velocity_mps, size=n)
    targets = rng.uniform(0.0, side, size=(n, 2))
    speeds = rng.uniform(0.0, 2.0 * v_user)
    max_speed = float(2.0 * v_user.max()) if n else 0.0

    users_a, users_b, starts, ends = [], [], [], []
    iu = np.triu_indices(n, k=1)

    def in_range() -> np.ndarray:
        diff = pos[:, None, :] - pos[None, :, :]
        dist = np.sqrt((diff ** 2).sum(axis=2))
        return dist[iu] <= params.tx_range_m

    active = in_range()
    open_start = np.zeros(active.shape)
    travelled = np.zeros(n)
    if max_speed == 0.0:
        # Static users: contacts are fixed by the initial positions.
        for idx in np.nonzero(active)[0]:
            users_a.append(int(iu[0][idx]))
            users_b.append(int(iu[1][idx]))
            starts.append(0.0)
            ends.append(params.duration_s)
        trace = ContactTrace(
            user_a=np.asarray(users_a, dtype=int),
            user_b=np.asarray(users_b, dtype=int),
            start_s=np.asarray(starts, dtype=float),
            end_s=np.asarray(ends, dtype=float),
            horizon=params.duration_s,
        )
        return RwpRun(trace=trace, user_velocity=np.zeros(n))

    dt = params.tx_range_m / (10.0 * max_speed)
    t = 0.0
    while t < params.duration_s:
        step_dt = min(dt, params.duration_s - t)
        t += step_dt
        to_target = targets - pos
        dist_target = np.sqrt((to_target ** 2).sum(axis=1))
        step = speeds * step_dt
        arrive = dist_target <= step
        move = ~arrive & (dist_target > 0)
        travelled += np.where(arrive, dist_target, np.where(move, step, 0.0))
        pos[arrive] = targets[arrive]
        pos[move] += to_target[move] * (step[move] / dist_target[move])[:, None]
        for idx in np.nonzero(arrive)[0]:
            targets[idx] = rng.uniform(0.0, side, size=2)
            speeds[idx] = rng.uniform(0.0, 2.0 * v_user[idx])
        now = in_range()
        opened = now & ~active
        closed = active & ~now
        open_start[opened] = t
        for idx in np.nonzero(closed)[0]:
            users_a.append(int(iu[0][idx]))
            users_b.append(int(iu[1][idx]))
            starts.append(float(open_start[idx]))
            ends.append(t)
        active = now
    for idx in np.nonzero(active)[0]:
        users_a.append(int(iu[0][idx]))
        users_b.append(int(iu[1][idx]))
        starts.append(float(open_start[idx]))
        ends.append(params.duration_s)
    trace = ContactTrace(
        user_a=np.asarray(users_a, dtype=int),
        user_b=np.asarray(users_b, dtype=int),
        start_s=np.asarray(starts, dtype=float),
        end_s=np.asarray(ends, dtype=float),
        horizon=params.duration_s,
    )
    return RwpRun(trace=trace, user_velocity=travelled / params.duration_s)


def save_trace(trace: ContactTrace, path) -> None:
    """Write a contact trace as CSV with header a,b,start_s,end_s."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["a", "b", "start_s", "end_s"])
        for a, b, s, e in zip(trace.user_a, trace.user_b, trace.start_s, trace.end_s):
            writer.writerow([int(a), int(b), repr(float(s)), repr(float(e))])


def load_trace(path, horizon: float | None = None) -> ContactTrace:
    """Read a contact-trace CSV; horizon defaults to the latest record end."""
    users_a, users_b, starts, ends = [], [], [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            users_a.append(int(row["a"]))
            users_b.append(int(row["b"]))
            starts.append(float(row["start_s"]))
            ends.append(float(row["end_s"]))
    if horizon is None:
        horizon = max(ends) if ends else 0.0
        if horizon <= 0:
            raise ValueError("cannot infer a positive horizon from an empty trace")
    return ContactTrace(
        user_a=np.asarray(users_a, dtype=int),
        user_b=np.asarray(users_b, dtype=int),
        start_s=np.asarray(starts, dtype=float),
        end_s=np.asarray(ends, dtype=float),
        horizon=float(horizon),
    )


def save_rates(rates: np.ndarray, path) -> None:
    """Export a rate matrix as JSON matching the scenario schema's rates field."""
    from .model import _encode_rates

    doc = {"n_users": int(rates.shape[0]), "rates": _encode_rates(rates)}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
