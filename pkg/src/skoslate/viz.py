from __future__ import annotations
from pathlib import Path
from typing import Sequence

import numpy as np
import matplotlib.pyplot as plt

from .simeval import SimilarityReport

MEASURE_LABELS = {
    "exact": "Exact match",
    "levenshtein": "Levenshtein",
    "jaro_winkler": "Jaro-Winkler",
    "cosine": "Cosine (BPE)",
}
MEASURE_COLORS = {
    "exact": "#7fb3d5",
    "levenshtein": "#76d7c4",
    "jaro_winkler": "#f7dc6f",
    "cosine": "#e59866",
}


def plot_macro_scores(reports: Sequence[SimilarityReport], out_png: Path,
                      title: str = "Back-translation similarity (macro average)") -> None:
    """Grouped bars: one group per evaluated language, one bar per measure."""
    if not reports:
        raise ValueError("no reports to plot")
    measures = list(reports[0].measures)
    x = np.arange(len(reports))
    width = 0.8 / max(1, len(measures))

    fig, ax = plt.subplots(figsize=(max(4.0, 1.6 * len(reports) + 2), 3.2))
    for k, m in enumerate(measures):
        vals = [r.macro.get(m, 0.0) for r in reports]
        bars = ax.bar(x + (k - (len(measures) - 1) / 2) * width, vals, width,
                      color=MEASURE_COLORS.get(m, "#999"), label=MEASURE_LABELS.get(m, m))
        for b, v in zip(bars, vals):
            ax.text(b.get_x() + b.get_width() / 2, v + 0.01, f"{v:.2f}",
                    ha="center", va="bottom", fontsize=7)

    ax.set_xticks(x)
    ax.set_xticklabels([f"{r.language} (n={r.term_count})" for r in reports])
    ax.set_ylim(0, 1.1)
    ax.set_ylabel("Score")
    ax.set_title(title)
    ax.legend(fontsize=7, ncol=len(measures), loc="upper center", bbox_to_anchor=(0.5, -0.15), frameon=False)
    fig.tight_layout()
    fig.savefig(str(out_png), dpi=200)
    plt.close(fig)


def plot_score_distribution(report: SimilarityReport, out_png: Path, bins: int = 10) -> None:
    """Per-measure histogram of term scores; untranslated terms sit in the 0 bin."""
    measures = list(report.measures)
    fig, axes = plt.subplots(1, len(measures), figsize=(2.6 * len(measures), 2.4), sharey=True, squeeze=False)
    edges = np.linspace(0.0, 1.0, bins + 1)
    for ax, m in zip(axes[0], measures):
        vals = np.array([t.scores.value(m) for t in report.terms], dtype=float)
        ax.hist(vals, bins=edges, color=MEASURE_COLORS.get(m, "#999"), edgecolor="#444", linewidth=0.5)
        ax.set_title(MEASURE_LABELS.get(m, m), fontsize=9)
        ax.set_xlim(0, 1)
        ax.set_xlabel("Score")
    axes[0][0].set_ylabel("Terms")
    fig.suptitle(f"{report.prop}@{report.language}: score distribution", fontsize=10)
    fig.tight_layout()
    fig.savefig(str(out_png), dpi=200)
    plt.close(fig)
