"""Matplotlib renderings written next to the delimited report outputs.

Everything here is opt-in from the CLI; the machine-readable reports stay
the primary interface.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_METHOD_LABELS = {"non_backtracking": "Non-backtracking", "natural": "Natural"}
_METHOD_COLORS = {"non_backtracking": "#8c4fa8", "natural": "#2d8a4e"}


def _new_axes(width=5.0, height=3.4):
    fig, ax = plt.subplots(figsize=(width, height), dpi=150)
    return fig, ax


def save_mae_bars(report, path) -> None:
    """Grouped bars: per-outcome MAE for both methods."""
    outcomes = list(report.outcomes)
    x = np.arange(len(outcomes))
    fig, ax = _new_axes()
    for k, method in enumerate(("non_backtracking", "natural")):
        vals = [report.mae[o][method] for o in outcomes]
        ax.bar(
            x + (k - 0.5) * 0.36,
            vals,
            width=0.34,
            label=_METHOD_LABELS[method],
            color=_METHOD_COLORS[method],
        )
    ax.set_xticks(x)
    ax.set_xticklabels(outcomes)
    ax.set_ylabel("MAE over feasible cases")
    ax.set_title(f"{report.dataset} change({report.change_target})")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def save_truth_scatter(report, outcome, path) -> None:
    """Ground truth vs prediction for one outcome, both methods, y = x guide."""
    s = report.samples
    feas = s["feasible"]
    fig, ax = _new_axes(4.6, 4.2)
    pairs = (
        ("non_backtracking", s["nb_truth"][outcome], s["nb_pred"][outcome]),
        ("natural", s["natural_truth"][outcome], s["natural_pred"][outcome]),
    )
    for method, truth, pred in pairs:
        ax.scatter(
            truth[feas],
            pred[feas],
            s=4,
            alpha=0.35,
            label=_METHOD_LABELS[method],
            color=_METHOD_COLORS[method],
            linewidths=0,
        )
    lo = min(ax.get_xlim()[0], ax.get_ylim()[0])
    hi = max(ax.get_xlim()[1], ax.get_ylim()[1])
    ax.plot([lo, hi], [lo, hi], lw=0.8, color="0.3", zorder=0)
    ax.set_xlabel(f"ground-truth {outcome}")
    ax.set_ylabel(f"predicted {outcome}")
    ax.set_title(f"{report.dataset} change({report.change_target})")
    ax.legend(frameon=False, loc="upper left")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def save_ablation(sweep, outcomes, path) -> None:
    """Epsilon sweep: per-outcome MAE (left) and infeasible counts (right)."""
    eps = [e for e, _ in sweep]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.4, 3.4), dpi=150)
    for o in outcomes:
        for method in ("non_backtracking", "natural"):
            ax1.plot(
                eps,
                [r.mae[o][method] for _, r in sweep],
                marker="o",
                ms=3,
                label=f"{_METHOD_LABELS[method]} {o}",
                color=_METHOD_COLORS[method],
                alpha=1.0 if method == "natural" else 0.6,
            )
    ax1.set_xscale("log")
    ax1.set_xlabel("epsilon")
    ax1.set_ylabel("MAE over feasible cases")
    ax1.legend(frameon=False, fontsize=7)
    ax2.plot(eps, [r.infeasible_count for _, r in sweep], marker="s", ms=4, color="#b3542e")
    ax2.set_xscale("log")
    ax2.set_xlabel("epsilon")
    ax2.set_ylabel("infeasible queries")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def save_query_support(train_points, names, factual, nb_point, natural_point, path) -> None:
    """Two-variable support scatter with the factual and counterfactual points."""
    xname, yname = names
    fig, ax = _new_axes(4.6, 4.2)
    ax.scatter(train_points[0], train_points[1], s=3, alpha=0.2, color="#4878a8", linewidths=0)
    ax.scatter([factual[xname]], [factual[yname]], s=60, marker="*", color="#d4a017", label="factual", zorder=3)
    if nb_point is not None:
        ax.scatter(
            [nb_point[xname]], [nb_point[yname]], s=40, marker="^",
            color=_METHOD_COLORS["non_backtracking"], label="non-backtracking", zorder=3,
        )
    if natural_point is not None:
        ax.scatter(
            [natural_point[xname]], [natural_point[yname]], s=40, marker="o",
            color=_METHOD_COLORS["natural"], label="natural", zorder=3,
        )
    ax.set_xlabel(xname)
    ax.set_ylabel(yname)
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
