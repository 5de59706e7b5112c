"""File-based matplotlib figures for reports: score profiles and loss curves."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")  # render to files only, no display required

import matplotlib.pyplot as plt
import numpy as np


def plot_boundary_scores(
    scores: Sequence[float] | np.ndarray,
    boundaries: set[int],
    path: str | Path,
    title: str = "boundary scores",
) -> None:
    """Line plot of per-gap boundary scores with detected peaks marked."""
    scores = np.asarray(scores, dtype=float)
    gaps = np.arange(1, len(scores) + 1)
    fig, ax = plt.subplots(figsize=(9, 3))
    ax.plot(gaps, scores, marker=".", linewidth=1, color="tab:blue", label="score")
    if boundaries:
        marked = sorted(boundaries)
        ax.plot(
            marked,
            scores[[b - 1 for b in marked]],
            "x",
            markersize=9,
            color="tab:red",
            linestyle="none",
            label="boundary",
        )
    ax.set_xlabel("gap index")
    ax.set_ylabel("boundary score")
    ax.set_ylim(bottom=0)
    ax.set_title(title)
    ax.legend(loc="upper right")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_loss_curves(losses_per_model: Sequence[Sequence[float]], path: str | Path) -> None:
    """Per-epoch mean training loss, one curve per ensemble member."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for member, losses in enumerate(losses_per_model):
        epochs = np.arange(1, len(losses) + 1)
        ax.plot(epochs, losses, marker="o", label=f"model {member}")
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean cross-entropy loss")
    ax.set_title("training loss")
    if losses_per_model:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
