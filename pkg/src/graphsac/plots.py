"""Figure rendering for the CLI report paths.

Every plot lands next to the CSV/JSON it illustrates; the library's compute
paths never import this module.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_roc(report, path):
    fig, ax = plt.subplots(figsize=(4.5, 4.0))
    ax.plot(report.fpr, report.tpr, lw=1.8)
    ax.plot([0, 1], [0, 1], ls="--", lw=0.8, color="gray")
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.set_title(f"AUC = {report.auc:.4f}")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.02)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_score_histogram(scores, path):
    fig, ax = plt.subplots(figsize=(5.0, 3.2))
    if scores.mask is not None and scores.mask.any():
        ax.hist(scores.values[~scores.mask], bins=40, alpha=0.6, label="nominal")
        ax.hist(scores.values[scores.mask], bins=40, alpha=0.6, label="anomalous")
        ax.legend()
    else:
        ax.hist(scores.values, bins=40, alpha=0.8)
    ax.set_xlabel("anomaly score")
    ax.set_ylabel("nodes")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_grid_heatmap(sweep, which, path, label):
    mean = sweep.mean(which)
    fig, ax = plt.subplots(figsize=(5.0, 4.2))
    im = ax.imshow(mean.T, origin="lower", aspect="auto", cmap="viridis")
    ax.set_xticks(range(len(sweep.s_fractions)))
    ax.set_xticklabels([f"{v:g}" for v in sweep.s_fractions])
    ax.set_yticks(range(len(sweep.k_fractions)))
    ax.set_yticklabels([f"{v:g}" for v in sweep.k_fractions])
    ax.set_xlabel("sample fraction S/N")
    ax.set_ylabel("anomaly fraction K/N")
    for i in range(mean.shape[0]):
        for j in range(mean.shape[1]):
            if np.isfinite(mean[i, j]):
                ax.text(i, j, f"{mean[i, j]:.2f}", ha="center", va="center",
                        color="white", fontsize=7)
    fig.colorbar(im, ax=ax, label=label)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_concentration_decay(reports, path):
    points = [
        (r.details["draw_counts"], r.details["mean_deviations"])
        for r in reports
        if r.name == "concentration-decay-slope"
    ]
    if not points:
        return
    draws, devs = points[0]
    bounds = [r.rhs for r in reports if r.name.startswith("concentration-mean")]
    fig, ax = plt.subplots(figsize=(4.8, 3.6))
    ax.loglog(draws, devs, "o-", label="mean deviation")
    if len(bounds) == len(draws):
        ax.loglog(draws, bounds, "s--", label="bound")
    ax.set_xlabel("draws I")
    ax.set_ylabel("spectral deviation")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def ensure_dir(path) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path
