"""Figure rendering for fitted posteriors and cross-validation reports.

All figures are written straight to files with the Agg backend; nothing
here opens a window. Grayscale maps follow the convention that probability
one is black.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .analysis import MarginalTable


def _padded_stack(rows: list[np.ndarray]) -> np.ndarray:
    """Stack 1-D arrays of unequal length into a NaN-padded matrix."""
    width = max(len(r) for r in rows)
    out = np.full((len(rows), width), np.nan)
    for k, r in enumerate(rows):
        out[k, :len(r)] = r
    return out


def plot_segment_membership(tables: list[MarginalTable], path,
                            dpi: int = 150) -> None:
    """One grayscale panel per segment: sequences (rows) by positions
    (columns), darker where the posterior puts the position in that
    segment more often."""
    S = tables[0].values.shape[1]
    ids = [t.sequence_id for t in tables]
    fig, axes = plt.subplots(S, 1, figsize=(8, 1.2 + 1.8 * S), squeeze=False)
    for i in range(S):
        ax = axes[i, 0]
        img = _padded_stack([t.values[:, i] for t in tables])
        ax.imshow(img, aspect="auto", cmap="gray_r", vmin=0.0, vmax=1.0,
                  interpolation="nearest")
        ax.set_title(f"segment {i + 1} membership")
        ax.set_ylabel("sequence")
        ax.set_yticks(range(len(ids)))
        ax.set_yticklabels(ids, fontsize=6)
    axes[-1, 0].set_xlabel("position")
    fig.tight_layout()
    fig.savefig(path, dpi=dpi)
    plt.close(fig)


def plot_changepoint_marginals(tables: list[MarginalTable], path,
                               dpi: int = 150) -> None:
    """One panel per changepoint; each sequence's row is rescaled by its
    maximum so narrow posteriors stay visible."""
    K = tables[0].values.shape[0]
    if K == 0:
        return
    ids = [t.sequence_id for t in tables]
    fig, axes = plt.subplots(K, 1, figsize=(8, 1.2 + 1.8 * K), squeeze=False)
    for i in range(K):
        rows = []
        for t in tables:
            row = t.values[i]
            peak = row.max()
            rows.append(row / peak if peak > 0 else row)
        ax = axes[i, 0]
        ax.imshow(_padded_stack(rows), aspect="auto", cmap="gray_r",
                  vmin=0.0, vmax=1.0, interpolation="nearest")
        ax.set_title(f"changepoint {i + 1} position (per-sequence rescaled)")
        ax.set_ylabel("sequence")
        ax.set_yticks(range(len(ids)))
        ax.set_yticklabels(ids, fontsize=6)
    axes[-1, 0].set_xlabel("position")
    fig.tight_layout()
    fig.savefig(path, dpi=dpi)
    plt.close(fig)


def plot_segment_lengths(length_rows: list[dict], path, dpi: int = 150) -> None:
    """Box plots of posterior segment lengths, one panel per segment,
    boxes across sequences. Expects the quartile dicts produced by
    ``segment_length_posterior``."""
    segments = sorted({r["segment"] for r in length_rows})
    ids = list(dict.fromkeys(r["sequence_id"] for r in length_rows))
    fig, axes = plt.subplots(len(segments), 1,
                             figsize=(max(6, 0.45 * len(ids)), 2.2 * len(segments)),
                             squeeze=False)
    for k, seg in enumerate(segments):
        stats = []
        for sid in ids:
            row = next(r for r in length_rows
                       if r["sequence_id"] == sid and r["segment"] == seg)
            stats.append({
                "label": sid,
                "whislo": row["min"], "q1": row["q1"], "med": row["median"],
                "q3": row["q3"], "whishi": row["max"], "fliers": [],
            })
        ax = axes[k, 0]
        ax.bxp(stats, showfliers=False)
        ax.set_title(f"segment {seg} length")
        ax.tick_params(axis="x", labelsize=6, rotation=90)
    fig.tight_layout()
    fig.savefig(path, dpi=dpi)
    plt.close(fig)


def plot_score_differences(diffs_by_label: dict, path, reference: str = "",
                           dpi: int = 150) -> None:
    """Box plots of per-fold score differences against a reference model."""
    labels = list(diffs_by_label)
    if not labels:
        return
    fig, ax = plt.subplots(figsize=(max(5, 1.2 * len(labels)), 4))
    ax.boxplot([diffs_by_label[k] for k in labels], tick_labels=labels)
    ax.axhline(0.0, color="0.4", linewidth=0.8, linestyle="--")
    title = "per-fold score differences"
    if reference:
        title += f" vs {reference}"
    ax.set_title(title)
    ax.set_ylabel("score difference")
    fig.tight_layout()
    fig.savefig(path, dpi=dpi)
    plt.close(fig)
