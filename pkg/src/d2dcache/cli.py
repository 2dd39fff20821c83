"""Command-line front end: scenario generation, placement, evaluation, and
strategy-comparison sweeps.

Exit codes: 2 for usage errors, 3 when an enumeration limit is exceeded,
4 for placement constraint violations, 1 for anything else.  All commands
are deterministic given their full flag set, including seeds.
"""

from __future__ import annotations

import csv
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import click
import numpy as np

from . import baselines, greedy, mobility
from .dp import DEFAULT_STATE_LIMIT, ResourceLimitError, dp_optimal
from .model import (
    ConstraintViolationError,
    Placement,
    Scenario,
    generate_scenario,
    load_placement,
    load_scenario,
    save_placement,
    save_scenario,
)
from .objective import offloading_ratio

EXIT_RESOURCE_LIMIT = 3
EXIT_CONSTRAINT_VIOLATION = 4

STRATEGIES = ("dp", "greedy", "random", "popular")
AXES = ("n_users", "capacity", "mean_rate", "gamma_r")


@dataclass(frozen=True)
class SweepSpec:
    """One comparison sweep: vary one axis, replicate over seeds."""

    axis: str
    values: tuple
    strategies: tuple
    trials: int
    seed: int

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"unknown sweep axis {self.axis!r}")
        if not self.values or not self.strategies:
            raise ValueError("sweep needs at least one axis value and one strategy")
        if any(s not in STRATEGIES for s in self.strategies):
            raise ValueError("unknown strategy in sweep")
        if self.trials < 1:
            raise ValueError("sweep needs at least one run per cell")


def _fail(code: int, message: str):
    click.echo(message, err=True)
    sys.exit(code)


def _comma_floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError as exc:
        raise click.BadParameter(str(exc))


def _scenario_flags(command):
    """Shared synthetic-scenario parameters (defaults follow the simulation
    setup: 20-file Zipf library, 120 s deadline, Gamma(4.43, 1/1088) rates)."""
    flags = [
        click.option("--users", type=click.IntRange(min=2), default=5, show_default=True),
        click.option("--files", type=click.IntRange(min=1), default=20, show_default=True),
        click.option("--gamma-r", type=click.FloatRange(min=0), default=0.6, show_default=True),
        click.option("--kmax", type=click.IntRange(min=1), default=3, show_default=True),
        click.option("--capacity", type=click.IntRange(min=1), default=3, show_default=True),
        click.option("--deadline", type=click.FloatRange(min=0, min_open=True), default=120.0, show_default=True),
        click.option("--rate-shape", type=click.FloatRange(min=0, min_open=True), default=4.43, show_default=True),
        click.option("--rate-scale", type=click.FloatRange(min=0, min_open=True), default=1.0 / 1088.0, show_default=True),
        click.option("--budget", type=click.IntRange(min=1), default=1, show_default=True),
    ]
    for flag in reversed(flags):
        command = flag(command)
    return command


@click.group()
def main():
    """Mobility-aware D2D cache placement toolkit."""


@main.command()
@_scenario_flags
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def generate(users, files, gamma_r, kmax, capacity, deadline, rate_shape, rate_scale, budget, seed, out):
    """Write a synthetic scenario JSON file."""
    scenario = generate_scenario(
        n_users=users,
        n_files=files,
        gamma_r=gamma_r,
        k_max=kmax,
        capacity=capacity,
        deadline=deadline,
        rate_shape=rate_shape,
        rate_scale=rate_scale,
        budget=budget,
        seed=seed,
    )
    save_scenario(scenario, out)
    click.echo(f"wrote scenario with {users} users, {files} files to {out}")


def _place(scenario: Scenario, strategy: str, seed: int, state_limit: int):
    if strategy == "dp":
        placement, value = dp_optimal(scenario, state_limit=state_limit)
        return placement, value, None
    if strategy == "greedy":
        placement, value, trace = greedy.greedy_place(scenario)
        return placement, value, trace
    if strategy == "random":
        placement = baselines.random_place(scenario, seed)
    else:
        placement = baselines.popular_place(scenario)
    return placement, offloading_ratio(scenario, placement), None


def _popular_file_set(scenario: Scenario) -> np.ndarray:
    order = np.argsort(-scenario.library.popularity, kind="stable")
    return order[: scenario.capacity]


def popfrac_report(scenario: Scenario, placement: Placement, bin_edges=None):
    """Fraction of each user's capacity spent on the most popular files,
    averaged in bins of the user's total contact rate.

    Returns (per-user rates, per-user fractions, list of bin rows); the
    default bins split the observed rate range into 10 equal widths.
    """
    top = _popular_file_set(scenario)
    frac = placement.counts[:, top].sum(axis=1) / scenario.capacity
    off = scenario.contact_rate.copy()
    np.fill_diagonal(off, 0.0)
    user_rate = off.sum(axis=1)
    if bin_edges is None:
        lo, hi = float(user_rate.min()), float(user_rate.max())
        if hi <= lo:
            hi = lo + 1e-12
        bin_edges = np.linspace(lo, hi, 11)
    else:
        bin_edges = np.asarray(sorted(bin_edges), dtype=float)
        if bin_edges.size < 2:
            raise ValueError("need at least two bin edges")
    rows = []
    for lo, hi in zip(bin_edges[:-1], bin_edges[1:]):
        if hi == bin_edges[-1]:
            mask = (user_rate >= lo) & (user_rate <= hi)
        else:
            mask = (user_rate >= lo) & (user_rate < hi)
        rows.append(
            {
                "bin_low": float(lo),
                "bin_high": float(hi),
                "n_users": int(mask.sum()),
                "mean_popfrac": float(frac[mask].mean()) if mask.any() else float("nan"),
            }
        )
    return user_rate, frac, rows


@main.command()
@click.argument("scenario_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--strategy", type=click.Choice(STRATEGIES), required=True)
@click.option("--seed", type=int, default=0, show_default=True, help="Seed for the random strategy.")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Placement JSON output path.")
@click.option("--pick-trace", type=click.Path(dir_okay=False), default=None, help="Greedy pick-trace CSV output.")
@click.option("--state-limit", type=int, default=DEFAULT_STATE_LIMIT, show_default=True)
@click.option("--report", type=click.Choice(["popfrac"]), default=None)
@click.option("--report-out", type=click.Path(dir_okay=False), default=None)
@click.option("--popfrac-bins", type=str, default=None, help="Comma-separated contact-rate bin edges.")
@click.option("--plot/--no-plot", default=False, help="Render the report figure next to its CSV.")
def place(scenario_file, strategy, seed, out, pick_trace, state_limit, report, report_out, popfrac_bins, plot):
    """Compute a placement for a scenario and print its objective value."""
    scenario = load_scenario(scenario_file)
    try:
        placement, value, picks = _place(scenario, strategy, seed, state_limit)
    except ResourceLimitError as exc:
        _fail(EXIT_RESOURCE_LIMIT, str(exc))
    if out:
        save_placement(placement, out)
    if pick_trace is not None:
        if picks is None:
            raise click.UsageError("--pick-trace is only available with --strategy greedy")
        greedy.write_pick_trace(picks, pick_trace)
    if report == "popfrac":
        if report_out is None:
            raise click.UsageError("--report popfrac requires --report-out")
        edges = _comma_floats(popfrac_bins) if popfrac_bins else None
        _, _, rows = popfrac_report(scenario, placement, edges)
        with open(report_out, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=["bin_low", "bin_high", "n_users", "mean_popfrac"])
            writer.writeheader()
            writer.writerows(rows)
        if plot:
            from .plotting import plot_popfrac

            centers = [(r["bin_low"] + r["bin_high"]) / 2 for r in rows if r["n_users"] > 0]
            means = [r["mean_popfrac"] for r in rows if r["n_users"] > 0]
            plot_popfrac(centers, means, _figure_path(report_out))
    click.echo(f"{strategy} offloading ratio: {value:.6f}")


@main.command()
@click.argument("scenario_file", type=click.Path(exists=True, dir_okay=False))
@click.argument("placement_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--mode", type=click.Choice(["analytic", "mc", "replay"]), default="analytic", show_default=True)
@click.option("--trials", type=click.IntRange(min=1), default=10000, show_default=True)
@click.option("--trace", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--epochs", type=str, default=None, help="Comma-separated request epochs (s) for replay.")
@click.option("--horizon", type=click.FloatRange(min=0, min_open=True), default=None, help="Trace horizon override (s).")
@click.option("--seed", type=int, default=0, show_default=True)
def evaluate(scenario_file, placement_file, mode, trials, trace, epochs, horizon, seed):
    """Evaluate a placement analytically, by Monte Carlo, or by trace replay."""
    scenario = load_scenario(scenario_file)
    placement = load_placement(placement_file)
    try:
        if mode == "analytic":
            click.echo(f"offloading ratio: {offloading_ratio(scenario, placement):.6f}")
            return
        if mode == "mc":
            est = mobility.monte_carlo_ratio(scenario, placement, trials, seed)
        else:
            if trace is None:
                raise click.UsageError("--mode replay requires --trace")
            if epochs is None:
                raise click.UsageError("--mode replay requires --epochs")
            contact_trace = mobility.load_trace(trace, horizon=horizon)
            est = mobility.replay_ratio(placement, contact_trace, scenario, _comma_floats(epochs), seed)
    except ConstraintViolationError as exc:
        lines = "\n".join(str(v) for v in exc.violations)
        _fail(EXIT_CONSTRAINT_VIOLATION, f"placement violates scenario constraints:\n{lines}")
    click.echo(f"offloading ratio: {est.mean:.6f} +/- {est.std_error:.6f} ({est.trials} trials)")


def _gamma_params_for_mean(mean: float, base_shape: float, base_scale: float):
    # hold the rate variance at base_shape*base_scale^2 while moving the mean
    var = base_shape * base_scale**2
    return mean**2 / var, var / mean


def _run_cell(args):
    """One sweep cell replicate: build the scenario, run each strategy."""
    (axis, value, run, base, strategies, seed) = args
    params = dict(base)
    if axis == "n_users":
        params["n_users"] = int(value)
    elif axis == "capacity":
        params["capacity"] = int(value)
    elif axis == "gamma_r":
        params["gamma_r"] = float(value)
    else:
        shape, scale = _gamma_params_for_mean(float(value), params["rate_shape"], params["rate_scale"])
        params["rate_shape"], params["rate_scale"] = shape, scale
    cell_seed = int(
        np.random.SeedSequence(
            [seed, AXES.index(axis), int(1e6 * value) & 0x7FFFFFFF, run]
        ).generate_state(1)[0]
    )
    scenario = generate_scenario(seed=cell_seed, **params)
    out = {}
    for strategy in strategies:
        _, val, _ = _place(scenario, strategy, seed=cell_seed + 1, state_limit=DEFAULT_STATE_LIMIT)
        out[strategy] = val
    return out


def run_sweep(spec: SweepSpec, base_params: dict, workers: int | None = None):
    """Run every (axis value, replicate) cell and aggregate per strategy.

    Returns (rows, failures): rows are dicts ready for the CSV, sorted by
    axis value then strategy; failures list (value, run, message).
    """
    if workers is None:
        workers = int(os.environ.get("D2DCACHE_WORKERS", "1"))
    jobs = [
        (spec.axis, value, run, base_params, spec.strategies, spec.seed)
        for value in spec.values
        for run in range(spec.trials)
    ]
    results = []
    failures = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_cell, job) for job in jobs]
            for job, fut in zip(jobs, futures):
                try:
                    results.append((job, fut.result()))
                except Exception as exc:  # noqa: BLE001 - cell failures become partial output
                    failures.append((job[1], job[2], str(exc)))
    else:
        for job in jobs:
            try:
                results.append((job, _run_cell(job)))
            except Exception as exc:  # noqa: BLE001
                failures.append((job[1], job[2], str(exc)))
    rows = []
    for value in sorted(spec.values):
        for strategy in sorted(spec.strategies):
            vals = [res[strategy] for job, res in results if job[1] == value]
            if not vals:
                continue
            arr = np.asarray(vals)
            stderr = float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else 0.0
            rows.append(
                {
                    "axis": spec.axis,
                    "value": value,
                    "strategy": strategy,
                    "mean_ratio": float(arr.mean()),
                    "stderr": stderr,
                    "runs": int(arr.size),
                }
            )
    return rows, failures


def _figure_path(csv_path: str) -> str:
    root, _ = os.path.splitext(csv_path)
    return root + ".png"


@main.command()
@_scenario_flags
@click.option("--axis", type=click.Choice(AXES), required=True)
@click.option("--values", type=str, required=True, help="Comma-separated axis values.")
@click.option("--strategies", type=str, default="greedy,random,popular", show_default=True)
@click.option("--runs", type=click.IntRange(min=1), default=20, show_default=True, help="Scenario seeds per cell.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Results CSV path.")
@click.option("--plot/--no-plot", default=False, help="Render the comparison figure next to the CSV.")
def compare(users, files, gamma_r, kmax, capacity, deadline, rate_shape, rate_scale, budget, axis, values, strategies, runs, seed, out, plot):
    """Sweep one axis, rerun every strategy per cell, and write a results CSV."""
    strategy_list = tuple(s.strip() for s in strategies.split(",") if s.strip())
    for s in strategy_list:
        if s not in STRATEGIES:
            raise click.BadParameter(f"unknown strategy {s!r}")
    value_list = tuple(_comma_floats(values))
    try:
        spec = SweepSpec(axis=axis, values=value_list, strategies=strategy_list, trials=runs, seed=seed)
    except ValueError as exc:
        raise click.BadParameter(str(exc))
    base_params = {
        "n_users": users,
        "n_files": files,
        "gamma_r": gamma_r,
        "k_max": kmax,
        "capacity": capacity,
        "deadline": deadline,
        "rate_shape": rate_shape,
        "rate_scale": rate_scale,
        "budget": budget,
    }
    rows, failures = run_sweep(spec, base_params)
    with open(out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["axis", "value", "strategy", "mean_ratio", "stderr", "runs"])
        writer.writeheader()
        writer.writerows(rows)
    if plot and rows:
        from .plotting import plot_comparison

        plot_comparison(rows, axis, _figure_path(out))
    click.echo(f"wrote {len(rows)} rows to {out}")
    if failures:
        for value, run, message in failures:
            click.echo(f"cell value={value} run={run} failed: {message}", err=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
