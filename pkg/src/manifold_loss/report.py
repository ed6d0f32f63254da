"""Report figures rendered alongside the CSV/JSON outputs.

The delimited files remain the machine-readable contract; these plots are
a convenience for eyeballing runs.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _curves_by_cell(rows):
    cells = {}
    for row in rows:
        cells.setdefault(row["config_label"], {}).setdefault(
            row["seed"], []
        ).append((row["epoch"], row["val_psnr"]))
    return cells


def render_figures(rows, summary, out_dir):
    out_dir = Path(out_dir)
    if rows:
        _psnr_curves(rows, out_dir / "psnr_curves.png")
    deltas = {
        label: cell["delta_psnr_vs_original"]
        for label, cell in summary.get("cells", {}).items()
        if cell.get("delta_psnr_vs_original") is not None and label != "original"
    }
    if deltas:
        _delta_bars(deltas, out_dir / "final_psnr_delta.png")


def _psnr_curves(rows, path):
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label, by_seed in sorted(_curves_by_cell(rows).items()):
        epochs = sorted({e for pts in by_seed.values() for e, _ in pts})
        mean = [
            np.mean([dict(pts)[e] for pts in by_seed.values() if e in dict(pts)])
            for e in epochs
        ]
        ax.plot(epochs, mean, marker="o", markersize=3, label=label)
    ax.set_xlabel("epoch")
    ax.set_ylabel("validation PSNR (dB)")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _delta_bars(deltas, path):
    labels = sorted(deltas)
    values = [deltas[l] for l in labels]
    fig, ax = plt.subplots(figsize=(max(5, 0.9 * len(labels) + 2), 4))
    colors = ["tab:green" if v >= 0 else "tab:red" for v in values]
    ax.bar(range(len(labels)), values, color=colors)
    ax.axhline(0.0, color="k", linewidth=0.8)
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("final PSNR delta vs original (dB)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
