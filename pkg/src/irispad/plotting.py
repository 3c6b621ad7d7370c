"""Matplotlib rendering of evaluation figures.

Figures accompany the delimited outputs; the CSVs remain the canonical data.
Imports happen inside the functions so the library stays importable without a
working matplotlib backend.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

from .core import Label, PadClass


def _split_by_class(records: Sequence[tuple[float, float, Label]]):
    bona = [(q, s2) for q, s2, label in records if label.kind is PadClass.BONA_FIDE]
    attack = [(q, s2) for q, s2, label in records if label.kind is PadClass.ATTACK]
    return bona, attack


def save_scatter_figure(records: Sequence[tuple[float, float, Label]], path) -> Path:
    """Scatter of (texture score, shape score) with one series per class."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    bona, attack = _split_by_class(records)
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    if bona:
        ax.scatter([s2 for _, s2 in bona], [q for q, _ in bona], s=18, marker="o",
                   label="bona fide", color="tab:green", alpha=0.75)
    if attack:
        ax.scatter([s2 for _, s2 in attack], [q for q, _ in attack], s=18, marker="x",
                   label="attack", color="tab:red", alpha=0.75)
    ax.set_xlabel("texture score (2d)")
    ax.set_ylabel("normal-variance score (3d)")
    ax.legend(loc="best")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path)
    plt.close(fig)
    return path


def save_score_histograms(records: Sequence[tuple[float, float, Label]], path) -> Path:
    """Side-by-side score distributions for the shape and texture paths."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    bona, attack = _split_by_class(records)
    fig, (ax3d, ax2d) = plt.subplots(1, 2, figsize=(8.0, 3.2))
    for ax, index, title in ((ax3d, 0, "shape score (3d)"), (ax2d, 1, "texture score (2d)")):
        series = [
            ([v[index] for v in bona], "bona fide", "tab:green"),
            ([v[index] for v in attack], "attack", "tab:red"),
        ]
        for values, label, color in series:
            if values:
                ax.hist(values, bins=16, alpha=0.6, label=label, color=color)
        ax.set_xlabel(title)
        ax.set_ylabel("count")
        ax.legend(loc="best")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path)
    plt.close(fig)
    return path


def save_score_figures(records: Sequence[tuple[float, float, Label]], out_dir) -> list[Path]:
    """Render the standard evaluation figures into a directory as SVG."""
    out_dir = Path(out_dir)
    return [
        save_scatter_figure(records, out_dir / "scatter.svg"),
        save_score_histograms(records, out_dir / "score_hist.svg"),
    ]
