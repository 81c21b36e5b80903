"""Matplotlib rendering of report figures.

The run/report commands write these PNGs next to the report CSVs.  The Agg
backend is forced so rendering works headless, and PNG metadata is stripped
so repeated runs produce stable bytes.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .evaluation import WindowAggregate

_COLORS = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#8c564b"]


def render_eer_figure(
    aggregates: Mapping[str, Sequence[WindowAggregate]],
    path: str | Path,
    metric: str = "skilled",
    title: str | None = None,
) -> None:
    """Plot mean EER vs window start, one line per system, with std bands.

    metric selects which EER series to draw: 'skilled', 'random' or
    'combined'.
    """
    if metric not in ("skilled", "random", "combined"):
        raise ValueError(f"unknown metric {metric!r}")
    mean_attr = f"eer_{metric}_mean"
    std_attr = f"eer_{metric}_std"

    fig, ax = plt.subplots(figsize=(7.2, 4.2))
    for i, (name, agg) in enumerate(sorted(aggregates.items())):
        if not agg:
            continue
        xs = [w.start for w in agg]
        means = [getattr(w, mean_attr) for w in agg]
        stds = [getattr(w, std_attr) for w in agg]
        color = _COLORS[i % len(_COLORS)]
        ax.plot(xs, means, label=name, color=color, linewidth=1.6)
        ax.fill_between(
            xs,
            [m - s for m, s in zip(means, stds)],
            [m + s for m, s in zip(means, stds)],
            color=color,
            alpha=0.18,
            linewidth=0,
        )
    ax.set_xlabel("window start (events)")
    ax.set_ylabel(f"EER ({metric} forgeries)")
    ax.set_ylim(bottom=0)
    ax.set_title(title or f"Windowed EER, {metric} forgeries")
    ax.legend(loc="best")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150, metadata={"Software": None})
    plt.close(fig)
