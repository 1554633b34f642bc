"""Figure rendering for run reports.

Figures are drawn on bare ``Figure`` objects with the Agg canvas, so nothing
here touches pyplot's global state or needs a display.
"""

from __future__ import annotations

import json
import math

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from tempembed import __version__
from tempembed.evaluation import pr_curve, roc_curve

GOLDEN = (math.sqrt(5) - 1.0) / 2.0

RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.4,
}


def new_figure(width=6.0, height=None, ncols=1):
    fig = Figure(figsize=(width, height or width * GOLDEN / ncols * 1.2), facecolor="w")
    FigureCanvasAgg(fig)
    axes = [fig.add_subplot(1, ncols, i + 1) for i in range(ncols)]
    return fig, axes


def _style(ax):
    ax.spines["top"].set_visible(False)
    ax.spines["right"].set_visible(False)
    ax.tick_params(labelsize=RC["xtick.labelsize"])
    ax.grid(True, color="0.9", linewidth=0.6)


def save(fig, path, meta=None):
    info = {"Software": f"tempembed {__version__}"}
    if meta:
        info["Description"] = json.dumps(meta, sort_keys=True)
    fig.savefig(str(path), dpi=120, bbox_inches="tight", metadata=info)


def plot_loss(history, path, meta=None):
    """Training loss per epoch; entry 0 is the untrained model."""
    fig, (ax,) = new_figure(5.0)
    epochs = np.arange(len(history))
    ax.plot(epochs, history, color="C0", marker="o" if len(history) < 30 else None, ms=3)
    ax.set_xlabel("epoch", fontsize=RC["axes.labelsize"])
    ax.set_ylabel("mean BCE (train)", fontsize=RC["axes.labelsize"])
    ax.set_title("training loss", fontsize=RC["axes.titlesize"])
    _style(ax)
    save(fig, path, meta)
    return path


def plot_roc_pr(labels, scores, path, report=None):
    """ROC and precision-recall curves side by side."""
    labels = np.asarray(labels, dtype=float)
    scores = np.asarray(scores, dtype=float)
    fig, (ax_roc, ax_pr) = new_figure(9.0, 3.8, ncols=2)

    fpr, tpr = roc_curve(labels, scores)
    auc = (report or {}).get("roc_auc")
    ax_roc.plot(fpr, tpr, color="C0", label=f"ROC-AUC {auc:.3f}" if auc is not None else None)
    ax_roc.plot([0, 1], [0, 1], color="0.6", linestyle="--", linewidth=0.8)
    ax_roc.set_xlabel("false positive rate")
    ax_roc.set_ylabel("true positive rate")

    recall, precision = pr_curve(labels, scores)
    ap = (report or {}).get("pr_auc")
    ax_pr.step(np.r_[0.0, recall], np.r_[1.0, precision], where="post", color="C1",
               label=f"AP {ap:.3f}" if ap is not None else None)
    base = labels.mean() if labels.size else 0.0
    ax_pr.axhline(base, color="0.6", linestyle="--", linewidth=0.8)
    ax_pr.set_xlabel("recall")
    ax_pr.set_ylabel("precision")

    for ax in (ax_roc, ax_pr):
        ax.set_xlim(0, 1)
        ax.set_ylim(0, 1.02)
        _style(ax)
        if ax.get_legend_handles_labels()[0]:
            ax.legend(loc="lower right" if ax is ax_roc else "lower left", frameon=False)
    if report:
        fig.suptitle(f"scorer: {report.get('scorer', 'model')}", fontsize=RC["axes.titlesize"])
    save(fig, path, report.get("config") if report else None)
    return path
