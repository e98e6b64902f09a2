"""Scatter figures for the report: FAD against each subjective metric.

One panel per metric, saved as PNG next to the delimited output. Uses the
Agg backend so report generation works headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .report import ReportDocument

_METRIC_LABELS = {
    "ff": "Foreground fit",
    "bf": "Background fit",
    "aq": "Audio quality",
    "perceptual": "Perceptual score",
}


def render_figures(document: ReportDocument, out_dir: str | Path, dpi: int = 150) -> list[Path]:
    """Render one FAD-vs-metric scatter per metric; returns the PNG paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    for metric, points in document.scatter_points().items():
        fig, ax = plt.subplots(figsize=(4.2, 3.4))
        xs = [p[0] for p in points]
        ys = [p[1] for p in points]
        ax.scatter(xs, ys, s=36, color="tab:blue", zorder=3)
        for fad, value, code in points:
            ax.annotate(
                code,
                (fad, value),
                textcoords="offset points",
                xytext=(4, 4),
                fontsize=7,
            )
        ax.set_xlabel("FAD")
        ax.set_ylabel(_METRIC_LABELS[metric])
        ax.set_title(f"FAD vs {_METRIC_LABELS[metric].lower()}")
        ax.grid(True, linewidth=0.4, alpha=0.5)
        fig.tight_layout()
        path = out_dir / f"fad_vs_{metric}.png"
        fig.savefig(path, dpi=dpi)
        plt.close(fig)
        written.append(path)
    return written
