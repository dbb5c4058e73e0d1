"""Matplotlib rendering for the suite report (file output only)."""

from __future__ import annotations

from collections import defaultdict

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

METHOD_COLORS = {
    "naive": "tab:gray",
    "replay": "tab:blue",
    "ewc": "tab:orange",
    "si": "tab:green",
    "lwf": "tab:red",
    "gr": "tab:purple",
}


def _color(method: str):
    return METHOD_COLORS.get(method, "black")


def render_bwt_curves(bwt_rows, path) -> None:
    """One subplot per scenario: mean BWT_t per method across seeds."""
    by_scenario = defaultdict(lambda: defaultdict(lambda: defaultdict(list)))
    for scenario, method, seed, t, bwt in bwt_rows:
        by_scenario[scenario][method][t].append(bwt)
    scenarios = sorted(by_scenario)
    if not scenarios:
        scenarios = ["(empty)"]
        by_scenario["(empty)"] = {}
    ncols = 2 if len(scenarios) > 1 else 1
    nrows = (len(scenarios) + ncols - 1) // ncols
    fig, axes = plt.subplots(nrows, ncols, figsize=(5.5 * ncols, 3.6 * nrows),
                             squeeze=False)
    for k, scenario in enumerate(scenarios):
        ax = axes[k // ncols][k % ncols]
        for method in sorted(by_scenario[scenario]):
            steps = sorted(by_scenario[scenario][method])
            means = [float(np.mean(by_scenario[scenario][method][t]))
                     for t in steps]
            ax.plot(steps, means, marker="o", markersize=3, label=method,
                    color=_color(method))
        ax.axhline(0.0, color="black", linewidth=0.6, alpha=0.5)
        ax.set_title(scenario)
        ax.set_xlabel("domain index t")
        ax.set_ylabel("BWT_t")
        ax.legend(fontsize=7)
    for k in range(len(scenarios), nrows * ncols):
        axes[k // ncols][k % ncols].axis("off")
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)


def render_tradeoff(table2_rows, path) -> None:
    """Stability vs plasticity scatter, marker size scaled by TE."""
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    seen = set()
    for row in table2_rows:
        te = row["te"] if row["te"] is not None else 0.5
        label = row["method"] if row["method"] not in seen else None
        seen.add(row["method"])
        ax.scatter(row["plasticity"], row["stability"], s=40 + 260 * te,
                   color=_color(row["method"]), alpha=0.65, label=label,
                   edgecolors="none")
    ax.axhline(0.0, color="black", linewidth=0.6, alpha=0.5)
    ax.set_xlabel("plasticity (mean gain on incoming domains)")
    ax.set_ylabel("stability (mean BWT)")
    ax.set_title("stability-plasticity trade-off (marker size ~ TE)")
    if seen:
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)
