"""SVG renderings of the summary tables written by ``mdpagg experiment``.

Nothing here recomputes statistics: every panel is drawn from one of the
``summary*.csv`` tables, and the rows behind each panel are saved next to
its SVG.
"""
from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

FIGURES = ("frequency", "thresholds", "regret", "lifetime")

SUMMARY_FILES = {
    "frequency": "summary_frequency.csv",
    "thresholds": "summary_thresholds.csv",
    "regret": "summary.csv",
    "lifetime": "summary_lifetime.csv",
}

plt.rcParams["svg.hashsalt"] = "mdpagg"


def _mode(ta):
    return "threshold" if str(ta) == "True" else "free"


def _save(fig, frame, out_dir, stem):
    out_dir.mkdir(parents=True, exist_ok=True)
    svg = out_dir / f"{stem}.svg"
    fig.savefig(svg, format="svg", metadata={"Date": None})
    plt.close(fig)
    frame.to_csv(out_dir / f"{stem}.csv", index=False)
    return svg


def _true_threshold(results_dir):
    meta = Path(results_dir) / "meta.json"
    if meta.exists():
        return json.loads(meta.read_text()).get("true_threshold")
    return None


def plot_frequency(table, out_dir, true_threshold=None):
    paths = []
    for (ta, M, K), cell in table.groupby(["threshold_assumed", "M", "K"]):
        fig, ax = plt.subplots(figsize=(6, 3))
        ax.bar(cell["state"], cell["intervene_frequency"], width=1.0, color="tab:red")
        if true_threshold is not None:
            ax.axvline(true_threshold + 0.5, color="black", lw=1)
        ax.set(xlabel="state", ylabel="intervene frequency", ylim=(0, 1.05),
               title=f"K={K}, M={M} ({_mode(ta)})")
        fig.tight_layout()
        paths.append(_save(fig, cell, out_dir, f"frequency_{_mode(ta)}_M{M}_K{K}"))
    return paths


def plot_thresholds(table, out_dir, max_state=50):
    paths = []
    colors = {"lambda1": "tab:red", "lambda0": "tab:blue"}
    for (ta, M, K), cell in table.groupby(["threshold_assumed", "M", "K"]):
        fig, ax = plt.subplots(figsize=(6, 3))
        for boundary, part in cell.groupby("boundary"):
            part = part[part["state"] <= max_state]
            ax.bar(part["state"], part["count"], width=1.0, alpha=0.6,
                   color=colors.get(boundary), label=boundary)
        ax.set(xlabel="state", ylabel="replications", xlim=(0, max_state + 1),
               title=f"K={K}, M={M} ({_mode(ta)})")
        ax.legend()
        fig.tight_layout()
        paths.append(_save(fig, cell, out_dir, f"thresholds_{_mode(ta)}_M{M}_K{K}"))
    return paths


def plot_regret(table, out_dir):
    paths = []
    for (ta, M), cell in table.groupby(["threshold_assumed", "M"]):
        cell = cell.sort_values("K", ascending=False)
        stats = [
            {
                "label": str(K),
                "whislo": 1000 * row.q05,
                "q1": 1000 * row.q25,
                "med": 1000 * row.median,
                "q3": 1000 * row.q75,
                "whishi": 1000 * row.q95,
                "fliers": [],
            }
            for K, row in zip(cell["K"], cell.itertuples())
        ]
        fig, ax = plt.subplots(figsize=(6, 3.5))
        ax.bxp(stats, showfliers=False)
        ax.plot(range(1, len(stats) + 1), cell["mean_per_thousand"], "o", color="black")
        ax.set(xlabel="K", ylabel="regret (months per 1000)",
               title=f"M={M} ({_mode(ta)})")
        fig.tight_layout()
        paths.append(_save(fig, cell, out_dir, f"regret_{_mode(ta)}_M{M}"))
    return paths


def plot_lifetime(table, out_dir):
    paths = []
    colors = {"optimal": "tab:red", "never": "tab:blue"}
    for (ta, M, K), cell in table.groupby(["threshold_assumed", "M", "K"]):
        fig, ax = plt.subplots(figsize=(6, 3.5))
        for label, part in cell.groupby("policy"):
            ax.fill_between(part["state"], part["low"], part["high"],
                            color=colors.get(label), alpha=0.3, lw=0)
            ax.plot(part["state"], part["mean"], color=colors.get(label), label=label)
        ax.set(xlabel="state", ylabel="remaining life (months)",
               title=f"K={K}, M={M} ({_mode(ta)})")
        ax.legend()
        fig.tight_layout()
        paths.append(_save(fig, cell, out_dir, f"lifetime_{_mode(ta)}_M{M}_K{K}"))
    return paths


def render(results_dir, figure, out_dir=None):
    """Render one figure family from ``results_dir``; returns the SVG paths."""
    if figure not in FIGURES:
        raise ValueError(f"unknown figure {figure!r}; choose from {', '.join(FIGURES)}")
    results_dir = Path(results_dir)
    out_dir = Path(out_dir) if out_dir else results_dir / "figures"
    table = pd.read_csv(results_dir / SUMMARY_FILES[figure])
    if figure == "frequency":
        return plot_frequency(table, out_dir, _true_threshold(results_dir))
    if figure == "thresholds":
        return plot_thresholds(table, out_dir)
    if figure == "regret":
        return plot_regret(table, out_dir)
    return plot_lifetime(table, out_dir)
