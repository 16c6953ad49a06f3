"""Figure rendering for the report path: confusion-matrix heatmaps and a
fold-accuracy chart, written as PNG files next to the delimited output.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def confusion_figure(cm, path, title: str) -> Path:
    """Render one row-normalized confusion matrix as a heatmap."""
    path = Path(path)
    names = [label.name for label in cm.labels]
    fig, ax = plt.subplots(figsize=(4.8, 4.2))
    im = ax.imshow(cm.normalized, cmap="Blues", vmin=0.0, vmax=1.0)
    ax.set_xticks(range(len(names)), names, rotation=45, ha="right")
    ax.set_yticks(range(len(names)), names)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    ax.set_title(title)
    for i in range(len(names)):
        for j in range(len(names)):
            v = cm.normalized[i, j]
            ax.text(j, i, f"{v:.2f}", ha="center", va="center",
                    color="white" if v > 0.5 else "black", fontsize=8)
    fig.colorbar(im, ax=ax, fraction=0.046)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def fold_accuracy_figure(per_model: dict, path) -> Path:
    """Grouped bars of per-fold accuracy, one group per fold."""
    path = Path(path)
    models = list(per_model)
    k = max(len(a) for a in per_model.values())
    width = 0.8 / max(len(models), 1)
    fig, ax = plt.subplots(figsize=(5.6, 3.6))
    for m, name in enumerate(models):
        accs = per_model[name]
        xs = np.arange(len(accs)) + m * width
        ax.bar(xs, accs, width=width, label=name)
    ax.set_xticks(np.arange(k) + 0.4 - width / 2, [f"fold {i}" for i in range(k)])
    ax.set_ylabel("accuracy (%)")
    ax.set_ylim(0, 100)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
