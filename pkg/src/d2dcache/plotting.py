"""Figure rendering for report outputs (written next to the CSV data)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

_AXIS_LABELS = {
    "n_users": "number of users",
    "capacity": "cache capacity (segments)",
    "mean_rate": "network average contact rate (1/s)",
    "gamma_r": "popularity skew",
}


def plot_comparison(rows, axis: str, path) -> None:
    """Render strategy-comparison curves with standard-error bars.

    ``rows`` are dicts with keys value, strategy, mean_ratio, stderr, as
    written to the compare CSV.
    """
    strategies = sorted({r["strategy"] for r in rows})
    fig, ax = plt.subplots(figsize=(6, 4))
    for strategy in strategies:
        pts = sorted((r for r in rows if r["strategy"] == strategy), key=lambda r: r["value"])
        xs = [r["value"] for r in pts]
        ys = [r["mean_ratio"] for r in pts]
        es = [r["stderr"] for r in pts]
        ax.errorbar(xs, ys, yerr=es, marker="o", capsize=3, label=strategy)
    ax.set_xlabel(_AXIS_LABELS.get(axis, axis))
    ax.set_ylabel("data offloading ratio")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_popfrac(bin_centers, means, path) -> None:
    """Render mean popular-cache fraction against user contact-rate bins."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(bin_centers, means, marker="s")
    ax.set_xlabel("user average contact rate (1/s)")
    ax.set_ylabel("fraction of capacity on most popular files")
    ax.set_ylim(0, 1.05)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
