"""Descriptive statistics and histogram data over cleaned trajectories."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .errors import EmptyInput, TooFewSamples
from .model import UniformFrame

FEATURES = ("spacing", "follower_speed", "speed_diff", "follower_acceleration")

DEFAULT_HISTOGRAM_BINS = 40


@dataclass(frozen=True)
class SummaryStats:
    max: float
    min: float
    mean: float
    std: float  # sample (n-1)


@dataclass(frozen=True)
class FeatureStats:
    """Max/min/mean/std per feature over a pooled frame set."""

    features: Mapping[str, SummaryStats]
    n_samples: int
    n_trajectories: int


@dataclass(frozen=True)
class Histogram:
    """Binned distribution: half-open bins, last bin closed.

    Values outside the edge range land in ``underflow``/``overflow`` so the
    grand total always equals the input length.
    """

    feature: str
    bin_edges: tuple[float, ...]
    counts: tuple[int, ...]
    underflow: int = 0
    overflow: int = 0


def compute_feature_stats(frames: Iterable[UniformFrame]) -> FeatureStats:
    """Pooled per-feature statistics; deterministic and permutation-invariant."""
    frames = list(frames)
    if len(frames) < 2:
        raise TooFewSamples(f"need at least 2 frames, got {len(frames)}")
    per_feature = {}
    for feat in FEATURES:
        x = np.array([getattr(fr, feat) for fr in frames], dtype=float)
        per_feature[feat] = SummaryStats(
            max=float(np.max(x)),
            min=float(np.min(x)),
            mean=float(np.mean(x)),
            std=float(np.std(x, ddof=1)),
        )
    return FeatureStats(
        features=per_feature,
        n_samples=len(frames),
        n_trajectories=len({fr.traj_id for fr in frames}),
    )


def merge_feature_stats(a: FeatureStats, b: FeatureStats) -> FeatureStats:
    """Exact associative merge of stats over two disjoint frame sets."""
    merged = {}
    n1, n2 = a.n_samples, b.n_samples
    n = n1 + n2
    for feat in FEATURES:
        sa, sb = a.features[feat], b.features[feat]
        delta = sb.mean - sa.mean
        mean = sa.mean + delta * n2 / n
        m2 = (
            sa.std**2 * (n1 - 1)
            + sb.std**2 * (n2 - 1)
            + delta**2 * n1 * n2 / n
        )
        merged[feat] = SummaryStats(
            max=max(sa.max, sb.max),
            min=min(sa.min, sb.min),
            mean=mean,
            std=math.sqrt(m2 / (n - 1)),
        )
    return FeatureStats(
        features=merged,
        n_samples=n,
        n_trajectories=a.n_trajectories + b.n_trajectories,
    )


def histogram(
    values,
    bins: int = DEFAULT_HISTOGRAM_BINS,
    edges: Sequence[float] | None = None,
    feature: str = "",
) -> Histogram:
    """Bin values into [e_i, e_{i+1}) intervals, the last bin closed.

    With no explicit edges, ``bins`` equal-width bins span [min, max]
    (degenerate ranges are widened by +/-0.5 so a constant sample still lands
    in one bin).
    """
    x = np.asarray(list(values), dtype=float)
    if x.size == 0:
        raise EmptyInput("cannot build a histogram from no values")

    if edges is not None:
        edge_arr = np.asarray(edges, dtype=float)
        if edge_arr.size < 2 or np.any(np.diff(edge_arr) <= 0):
            raise ValueError("edges must be at least 2 strictly ascending values")
    else:
        if bins < 1:
            raise ValueError("bin count must be at least 1")
        lo, hi = float(np.min(x)), float(np.max(x))
        if lo == hi:
            lo, hi = lo - 0.5, hi + 0.5
        edge_arr = np.linspace(lo, hi, bins + 1)

    underflow = int(np.sum(x < edge_arr[0]))
    overflow = int(np.sum(x > edge_arr[-1]))
    in_range = x[(x >= edge_arr[0]) & (x <= edge_arr[-1])]
    counts, _ = np.histogram(in_range, bins=edge_arr)
    return Histogram(
        feature=feature,
        bin_edges=tuple(float(e) for e in edge_arr),
        counts=tuple(int(c) for c in counts),
        underflow=underflow,
        overflow=overflow,
    )


def stats_to_json_dict(stats: FeatureStats) -> dict[str, Any]:
    return {
        "features": {
            feat: {
                "max": s.max,
                "min": s.min,
                "mean": s.mean,
                "std": s.std,
            }
            for feat, s in sorted(stats.features.items())
        },
        "n_samples": stats.n_samples,
        "n_trajectories": stats.n_trajectories,
    }


def write_stats_csv(stats: FeatureStats, path: str | Path) -> None:
    """Write the stats table: features as columns, measures as rows."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("measure",) + FEATURES)
        for measure in ("max", "min", "mean", "std"):
            writer.writerow(
                (measure,)
                + tuple(f"{getattr(stats.features[f], measure):.6f}" for f in FEATURES)
            )
        writer.writerow(("n_samples",) + (stats.n_samples,) * len(FEATURES))
        writer.writerow(("n_trajectories",) + (stats.n_trajectories,) * len(FEATURES))


def write_histogram_csv(hist: Histogram, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("bin_left", "bin_right", "count"))
        for i, count in enumerate(hist.counts):
            writer.writerow(
                (f"{hist.bin_edges[i]:.6f}", f"{hist.bin_edges[i + 1]:.6f}", count)
            )
