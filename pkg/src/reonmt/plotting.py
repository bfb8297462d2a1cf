"""Figures for the ablation report."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

DEFAULT_STYLE = {
    "font.size": 10,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}


def plot_scores(rows, path):
    """Side-by-side BLEU and TER bars, one group per system."""
    names = [r["system"] for r in rows]
    x = np.arange(len(names))
    with plt.rc_context(DEFAULT_STYLE):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.2))
        ax1.bar(x, [r["bleu"] for r in rows], color="tab:blue")
        ax1.set_ylabel("BLEU")
        ax2.bar(x, [r["ter"] for r in rows], color="tab:orange")
        ax2.set_ylabel("TER")
        for ax in (ax1, ax2):
            ax.set_xticks(x)
            ax.set_xticklabels(names, rotation=30, ha="right")
        fig.savefig(path)
        plt.close(fig)


def plot_loss_curves(logs: dict, path):
    """Training (solid) and dev (dashed, when present) loss per epoch for each variant."""
    with plt.rc_context(DEFAULT_STYLE):
        fig, ax = plt.subplots(figsize=(5, 3.2))
        for k, (name, rows) in enumerate(logs.items()):
            color = f"C{k}"
            epochs = [r[0] for r in rows]
            ax.plot(epochs, [r[1] for r in rows], color=color, label=name)
            dev = [r[2] for r in rows]
            if not np.all(np.isnan(dev)):
                ax.plot(epochs, dev, color=color, linestyle="--")
        ax.set_xlabel("epoch")
        ax.set_ylabel("cross-entropy")
        ax.set_yscale("log")
        ax.legend(frameon=False)
        fig.savefig(path)
        plt.close(fig)


def plot_attention(weights, source_tokens, target_tokens, path, title=None):
    with plt.rc_context(DEFAULT_STYLE):
        fig, ax = plt.subplots(figsize=(0.4 * len(source_tokens) + 1.5,
                                        0.4 * len(target_tokens) + 1.2))
        ax.imshow(weights, cmap="Greys", vmin=0.0, vmax=1.0, aspect="auto")
        ax.set_xticks(range(len(source_tokens)))
        ax.set_xticklabels(source_tokens, rotation=90)
        ax.set_yticks(range(len(target_tokens)))
        ax.set_yticklabels(target_tokens)
        if title:
            ax.set_title(title)
        fig.savefig(path)
        plt.close(fig)
