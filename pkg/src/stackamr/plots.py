"""Learning-curve figure written next to the training log."""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.ticker import MaxNLocator  # noqa: E402


def learning_curve(rows: Sequence[tuple[int, float, float, float]], path: str | Path) -> None:
    """Plot training loss and dev Smatch per epoch from ``(epoch, lr, loss, f1)`` rows."""
    epochs = [r[0] for r in rows]
    fig, ax_loss = plt.subplots(figsize=(6, 3.5))
    ax_loss.plot(epochs, [r[2] for r in rows], color="tab:blue", marker="o", label="training loss")
    ax_loss.set_xlabel("epoch")
    ax_loss.xaxis.set_major_locator(MaxNLocator(integer=True))
    ax_loss.set_ylabel("training loss", color="tab:blue")
    ax_f1 = ax_loss.twinx()
    ax_f1.plot(epochs, [r[3] for r in rows], color="tab:orange", marker="s", label="dev Smatch F1")
    ax_f1.set_ylabel("dev Smatch F1", color="tab:orange")
    ax_f1.set_ylim(0.0, 1.05)
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
