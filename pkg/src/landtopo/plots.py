"""Report figures written alongside the tabular outputs.

Each report-producing command drops a PNG next to its CSV/JSON file
(confusion heatmap, learning curve, importance bars, probability box
plots). Purely additive: the delimited files remain the primary
artifacts and carry every number shown here.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_CLASS_COLORS = plt.rcParams["axes.prop_cycle"].by_key()["color"]


def save_confusion_figure(classes, counts, path, title="Cross-validated confusion"):
    counts = np.asarray(counts)
    fig, ax = plt.subplots(figsize=(5.2, 4.4))
    im = ax.imshow(counts, cmap="Blues")
    ax.set_xticks(range(len(classes)), classes, rotation=30, ha="right")
    ax.set_yticks(range(len(classes)), classes)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    ax.set_title(title)
    vmax = counts.max() if counts.size else 1
    for i in range(len(classes)):
        for j in range(len(classes)):
            ax.text(
                j, i, str(int(counts[i, j])),
                ha="center", va="center",
                color="white" if counts[i, j] > vmax / 2 else "black",
                fontsize=9,
            )
    fig.colorbar(im, ax=ax, shrink=0.85)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_importance_figure(names, importances, path, highlight=()):
    order = np.argsort(importances)
    names = [names[i] for i in order]
    values = np.asarray(importances)[order]
    colors = [
        _CLASS_COLORS[0] if n in highlight else _CLASS_COLORS[1] for n in names
    ]
    fig, ax = plt.subplots(figsize=(6.0, 0.32 * len(names) + 1.2))
    ax.barh(range(len(names)), values, color=colors)
    ax.set_yticks(range(len(names)), names, fontsize=8)
    ax.set_xlabel("normalized importance")
    ax.set_title("Feature importances")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_sweep_figure(rows, classes, path):
    sizes = [r["size"] for r in rows]
    fig, ax = plt.subplots(figsize=(5.6, 4.0))
    ax.plot(sizes, [100 * r["accuracy_mean"] for r in rows], "o-", color="black",
            label="overall")
    for k, cls in enumerate(classes):
        key = f"TPR_{cls}"
        if key in rows[0]:
            ax.plot(sizes, [100 * r[key] for r in rows], "s--",
                    color=_CLASS_COLORS[k % len(_CLASS_COLORS)], label=cls)
    ax.set_xlabel("training samples per class")
    ax.set_ylabel("classification accuracy (%)")
    ax.set_ylim(0, 101)
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_probability_box_figure(records, classes, path):
    """Per-group box plots of class probabilities for composite records."""
    groups = sorted({r["group"] for r in records})
    fig, axes = plt.subplots(
        1, len(groups), figsize=(3.6 * len(groups) + 0.8, 3.8), squeeze=False
    )
    for ax, grp in zip(axes[0], groups):
        data = [
            [r[f"p_{cls}"] for r in records if r["group"] == grp] for cls in classes
        ]
        box = ax.boxplot(data, tick_labels=classes, patch_artist=True)
        for patch, color in zip(box["boxes"], _CLASS_COLORS):
            patch.set_facecolor(color)
            patch.set_alpha(0.6)
        ax.set_title(str(grp), fontsize=9)
        ax.set_ylabel("class probability")
        ax.set_ylim(-0.02, 1.02)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
