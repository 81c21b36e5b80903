"""Score fusion, error rates, windowed equal-error-rate series, run aggregation.

A claim is accepted when its fused score is >= the decision threshold.  The
equal error rate uses a single global threshold shared by all users: the
candidate set is the sorted union of observed scores plus -inf/+inf
sentinels, and the reported EER is (FAR + FRR) / 2 at the candidate
minimizing |FAR - FRR| (ties resolved toward the smaller threshold).

Windowed metrics slide a fixed-size window over the verification event
sequence and report three EERs per window: genuine vs skilled forgeries,
genuine vs random forgeries, and genuine vs both pooled.  Multiple runs are
aggregated per window with sample mean and (n-1) standard deviation.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .dissimilarity import ClaimKind
from .errors import DataError

REPORT_HEADER = [
    "window_start",
    "eer_skilled_mean",
    "eer_skilled_std",
    "eer_random_mean",
    "eer_random_std",
    "eer_combined_mean",
    "eer_combined_std",
    "threshold_mean",
    "n_runs",
]


def fuse_max(scores: Sequence[float]) -> float:
    """Max fusion of per-reference classifier scores."""
    if len(scores) == 0:
        raise DataError("cannot fuse an empty score list")
    return float(max(scores))


def far_frr(
    genuine_scores: Sequence[float], forgery_scores: Sequence[float], tau: float
) -> tuple[float, float]:
    """(false acceptance rate, false rejection rate) at threshold tau."""
    g = np.asarray(genuine_scores, dtype=np.float64)
    f = np.asarray(forgery_scores, dtype=np.float64)
    if g.size == 0 or f.size == 0:
        raise DataError("far_frr needs at least one score in each class")
    far = float(np.mean(f >= tau))
    frr = float(np.mean(g < tau))
    return far, frr


def eer_global(
    genuine_scores: Sequence[float], forgery_scores: Sequence[float]
) -> tuple[float, float]:
    """Global-threshold equal error rate and the threshold achieving it."""
    g = np.asarray(genuine_scores, dtype=np.float64)
    f = np.asarray(forgery_scores, dtype=np.float64)
    if g.size == 0 or f.size == 0:
        raise DataError("eer_global needs at least one score in each class")
    candidates = np.concatenate(([-np.inf], np.unique(np.concatenate((g, f))), [np.inf]))
    best_eer = 1.0
    best_tau = float(candidates[0])
    best_gap = np.inf
    for tau in candidates:
        far = float(np.mean(f >= tau))
        frr = float(np.mean(g < tau))
        gap = abs(far - frr)
        if gap < best_gap:
            best_gap = gap
            best_eer = 0.5 * (far + frr)
            best_tau = float(tau)
    return best_eer, best_tau


@dataclass
class MetricsWindow:
    """EERs of one evaluation window; valid is False when a class is empty."""

    start: int
    eer_skilled: float
    eer_random: float
    eer_combined: float
    threshold_at_eer: float
    n_genuine: int
    n_random: int
    n_skilled: int
    valid: bool = True


def windowed_metrics(events: Sequence, w_size: int, w_step: int) -> list[MetricsWindow]:
    """Windows start at 0, w_step, 2*w_step, ...; partial tail windows drop.

    Events need ``kind`` (ClaimKind) and ``score`` attributes, ordered by
    stream position.  The reported threshold is the one achieving the
    skilled-forgery EER (the headline metric).
    """
    if w_size < 1 or w_step < 1:
        raise DataError("w_size and w_step must be >= 1")
    if w_step > w_size:
        raise DataError("w_step must be <= w_size")
    out: list[MetricsWindow] = []
    for start in range(0, len(events) - w_size + 1, w_step):
        window = events[start : start + w_size]
        g = [e.score for e in window if e.kind is ClaimKind.GENUINE]
        rf = [e.score for e in window if e.kind is ClaimKind.RANDOM_FORGERY]
        sk = [e.score for e in window if e.kind is ClaimKind.SKILLED_FORGERY]
        if not g or not rf or not sk:
            out.append(
                MetricsWindow(start, float("nan"), float("nan"), float("nan"),
                              float("nan"), len(g), len(rf), len(sk), valid=False)
            )
            continue
        eer_sk, tau_sk = eer_global(g, sk)
        eer_rf, _ = eer_global(g, rf)
        eer_both, _ = eer_global(g, rf + sk)
        out.append(
            MetricsWindow(start, eer_sk, eer_rf, eer_both, tau_sk,
                          len(g), len(rf), len(sk))
        )
    return out


@dataclass
class WindowAggregate:
    start: int
    eer_skilled_mean: float
    eer_skilled_std: float
    eer_random_mean: float
    eer_random_std: float
    eer_combined_mean: float
    eer_combined_std: float
    threshold_mean: float
    n_runs: int


def _mean_std(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values)
    mean = float(arr.mean())
    std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return mean, std


def aggregate_runs(runs: list[list[MetricsWindow]]) -> list[WindowAggregate]:
    """Per-window mean and (n-1) std across runs.

    All runs must produce the same window count; a window invalid in any run
    is excluded from the aggregate.
    """
    if not runs:
        raise DataError("no runs to aggregate")
    counts = {len(r) for r in runs}
    if len(counts) != 1:
        raise DataError(f"runs have mismatched window counts: {sorted(counts)}")
    out: list[WindowAggregate] = []
    for idx in range(len(runs[0])):
        windows = [r[idx] for r in runs]
        if not all(w.valid for w in windows):
            continue
        starts = {w.start for w in windows}
        if len(starts) != 1:
            raise DataError(f"window {idx} start positions disagree: {sorted(starts)}")
        sk_m, sk_s = _mean_std([w.eer_skilled for w in windows])
        rf_m, rf_s = _mean_std([w.eer_random for w in windows])
        cb_m, cb_s = _mean_std([w.eer_combined for w in windows])
        tau_m, _ = _mean_std([w.threshold_at_eer for w in windows])
        out.append(
            WindowAggregate(windows[0].start, sk_m, sk_s, rf_m, rf_s, cb_m, cb_s,
                            tau_m, len(windows))
        )
    return out


def write_report_csv(aggregate: Iterable[WindowAggregate], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_HEADER)
        for w in aggregate:
            writer.writerow(
                [
                    w.start,
                    repr(w.eer_skilled_mean),
                    repr(w.eer_skilled_std),
                    repr(w.eer_random_mean),
                    repr(w.eer_random_std),
                    repr(w.eer_combined_mean),
                    repr(w.eer_combined_std),
                    repr(w.threshold_mean),
                    w.n_runs,
                ]
            )


def read_report_csv(path: str | Path) -> list[WindowAggregate]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != REPORT_HEADER:
            raise DataError(f"{path}: unexpected report header {header}")
        out = []
        for row in reader:
            out.append(
                WindowAggregate(
                    int(row[0]), *(float(v) for v in row[1:8]), int(row[8])
                )
            )
    return out


# -- dependency-free SVG chart ------------------------------------------------

_SVG_SERIES = [
    ("eer_skilled_mean", "#d62728", "skilled"),
    ("eer_random_mean", "#1f77b4", "random"),
    ("eer_combined_mean", "#2ca02c", "combined"),
]


def write_eer_svg(
    aggregate: Sequence[WindowAggregate], path: str | Path, title: str = "EER by window"
) -> None:
    """Emit a plain SVG line chart of the three EER series vs window start."""
    if not aggregate:
        raise DataError("nothing to chart: aggregate is empty")
    width, height = 640, 400
    ml, mr, mt, mb = 60, 20, 30, 40
    plot_w, plot_h = width - ml - mr, height - mt - mb
    xs = [w.start for w in aggregate]
    x_lo, x_hi = min(xs), max(xs)
    x_span = (x_hi - x_lo) or 1
    y_hi = max(
        0.05, max(getattr(w, name) for w in aggregate for name, _, _ in _SVG_SERIES)
    )

    def px(x: float) -> float:
        return ml + (x - x_lo) / x_span * plot_w

    def py(y: float) -> float:
        return mt + (1.0 - y / y_hi) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13">{title}</text>',
        f'<line x1="{ml}" y1="{mt + plot_h}" x2="{ml + plot_w}" y2="{mt + plot_h}" '
        f'stroke="black"/>',
        f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{mt + plot_h}" stroke="black"/>',
    ]
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        y_val = frac * y_hi
        parts.append(
            f'<text x="{ml - 6}" y="{py(y_val) + 4:.1f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="10">{y_val:.3f}</text>'
        )
        parts.append(
            f'<line x1="{ml}" y1="{py(y_val):.1f}" x2="{ml + plot_w}" '
            f'y2="{py(y_val):.1f}" stroke="#dddddd"/>'
        )
    for frac in (0.0, 0.5, 1.0):
        x_val = x_lo + frac * x_span
        parts.append(
            f'<text x="{px(x_val):.1f}" y="{mt + plot_h + 16}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="10">{x_val:.0f}</text>'
        )
    for i, (name, color, label) in enumerate(_SVG_SERIES):
        points = " ".join(
            f"{px(w.start):.2f},{py(getattr(w, name)):.2f}" for w in aggregate
        )
        parts.append(
            f'<polyline points="{points}" fill="none" stroke="{color}" stroke-width="1.5"/>'
        )
        ly = mt + 14 + 14 * i
        parts.append(
            f'<line x1="{ml + plot_w - 90}" y1="{ly - 4}" x2="{ml + plot_w - 70}" '
            f'y2="{ly - 4}" stroke="{color}" stroke-width="1.5"/>'
        )
        parts.append(
            f'<text x="{ml + plot_w - 64}" y="{ly}" font-family="sans-serif" '
            f'font-size="10">{label}</text>'
        )
    parts.append(
        f'<text x="{ml + plot_w / 2:.1f}" y="{height - 8}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="11">window start (events)</text>'
    )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")
