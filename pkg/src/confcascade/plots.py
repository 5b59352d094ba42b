"""Figure rendering for run reports.

Every report path writes its figures next to the delimited output, so a run
directory is self-contained. PNG metadata is pinned for byte-stable reruns.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .metrics import FoldScores

_SAVE_KW = {"dpi": 120, "bbox_inches": "tight", "metadata": {"Software": "confcascade"}}


def figure_effectiveness(scores: list[FoldScores], path: str | Path) -> None:
    """Per-method mean Macro-F1 with 95% CI error bars."""
    names = [s.method for s in scores]
    means = [100.0 * s.mean for s in scores]
    errs = [100.0 * s.ci_half_width for s in scores]
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    x = np.arange(len(names))
    ax.bar(x, means, yerr=errs, capsize=4, color="#4878cf", edgecolor="black", linewidth=0.6)
    ax.set_xticks(x)
    ax.set_xticklabels(names)
    ax.set_ylabel("Macro-F1 (%)")
    ax.set_ylim(0, 105)
    for xi, m in zip(x, means):
        ax.text(xi, m + 1.5, f"{m:.1f}", ha="center", fontsize=8)
    ax.set_title("Effectiveness by method (mean over folds, 95% CI)")
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def figure_reliability(confidences: list[float], correct: list[bool], bins: int,
                       ece: float, path: str | Path) -> None:
    """Reliability diagram of the local classifier: bin accuracy vs confidence."""
    conf = np.asarray(confidences, dtype=float)
    hits = np.asarray(correct, dtype=float)
    idx = np.minimum(bins - 1, (conf * bins).astype(int))
    centers, accs, weights = [], [], []
    for b in range(bins):
        mask = idx == b
        if mask.any():
            centers.append(conf[mask].mean())
            accs.append(hits[mask].mean())
            weights.append(mask.mean())
    fig, ax = plt.subplots(figsize=(4.2, 4.2))
    ax.plot([0, 1], [0, 1], linestyle="--", color="gray", linewidth=1)
    ax.bar(centers, accs, width=1.0 / bins * 0.9, color="#4878cf",
           edgecolor="black", linewidth=0.6, alpha=0.85)
    ax.set_xlabel("Confidence")
    ax.set_ylabel("Accuracy")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    ax.set_title(f"Reliability ({bins} bins), ECE = {ece:.4f}")
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def figure_sweep(rows: list[dict], path: str | Path) -> None:
    """Three stacked panels vs threshold: Macro-F1, instances sent, total time."""
    t = [r["threshold"] for r in rows]
    fig, axes = plt.subplots(3, 1, figsize=(5.0, 7.5), sharex=True)
    axes[0].plot(t, [100.0 * r["macro_f1"] for r in rows], marker="o", color="#4878cf")
    axes[0].set_ylabel("Macro-F1 (%)")
    axes[1].plot(t, [r["instances_sent"] for r in rows], marker="o", color="#d65f5f")
    axes[1].set_ylabel("Instances sent to LLM")
    axes[2].plot(t, [r["total_time_s"] for r in rows], marker="o", color="#6acc65")
    axes[2].set_ylabel("Total time (s)")
    axes[2].set_xlabel("Confidence threshold")
    axes[0].set_title("Threshold sensitivity")
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
