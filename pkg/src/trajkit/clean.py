"""Three-step cleaning regimen plus experiment threshold filters.

Order is fixed: gap interpolation happens upstream on vehicle tracks, then per
trajectory keep-window trimming, then speed-floor / acceleration-bound
filters, then single-pass sigma-band outlier removal. Outlier statistics are
computed once on the frames entering that stage and never re-iterated.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .errors import AllInvalid, ConfigError, TooFewSamples
from .model import (
    MIN_TRAJECTORY_SECONDS,
    CfTrajectory,
    GpsFix,
    UniformFrame,
    VehicleTrack,
    reindex_frames,
)

OUTLIER_FEATURES = ("spacing", "follower_speed", "speed_diff", "follower_acceleration")

_EPS = 1e-9


@dataclass(frozen=True)
class CleaningConfig:
    """All cleaning thresholds and trim windows.

    ``trim_windows`` maps traj_id to KEEP windows ``[t_start, t_end)`` in
    seconds from trajectory start; everything outside is trimmed. The paper's
    unstable ranges were identified manually, so windows are user-supplied.
    ``speed_floor_mode`` selects whether a frame is dropped when either
    vehicle is below the floor ("either", default) or only when both are
    ("both"). ``outlier_scope`` selects whether sigma bands are computed per
    trajectory (default) or over the whole dataset.
    """

    sigma_k: float = 3.0
    speed_floor: float = 0.1
    accel_bound: float = 5.0
    max_gap: int = 10
    trim_windows: Mapping[str, tuple[tuple[float, float], ...]] = field(default_factory=dict)
    outlier_features: tuple[str, ...] = OUTLIER_FEATURES
    speed_floor_mode: str = "either"
    outlier_scope: str = "trajectory"

    def __post_init__(self) -> None:
        if self.sigma_k <= 0:
            raise ConfigError("sigma_k must be positive")
        if self.speed_floor < 0:
            raise ConfigError("speed_floor must be non-negative")
        if self.accel_bound <= 0:
            raise ConfigError("accel_bound must be positive")
        if self.max_gap < 1:
            raise ConfigError("max_gap must be at least 1 sample")
        if self.speed_floor_mode not in ("either", "both"):
            raise ConfigError("speed_floor_mode must be 'either' or 'both'")
        if self.outlier_scope not in ("trajectory", "dataset"):
            raise ConfigError("outlier_scope must be 'trajectory' or 'dataset'")
        unknown = set(self.outlier_features) - set(OUTLIER_FEATURES)
        if unknown:
            raise ConfigError(f"unknown outlier features: {sorted(unknown)}")


def cleaning_config_from_json(doc: Mapping[str, Any]) -> CleaningConfig:
    doc = dict(doc)
    if "trim_windows" in doc:
        doc["trim_windows"] = {
            str(tid): tuple((float(a), float(b)) for a, b in windows)
            for tid, windows in doc["trim_windows"].items()
        }
    if "outlier_features" in doc:
        doc["outlier_features"] = tuple(doc["outlier_features"])
    try:
        return CleaningConfig(**doc)
    except TypeError as exc:
        raise ConfigError(f"bad cleaning config: {exc}") from None


@dataclass
class CleaningReport:
    """Per-step removal counts. Aggregation across trajectories is additive."""

    interpolated_points: int = 0
    frames_trimmed: int = 0
    frames_discarded_short: int = 0
    frames_threshold_dropped: int = 0
    speed_floor_dropped: int = 0
    accel_bound_dropped: int = 0
    outlier_frames_dropped: int = 0
    outliers_removed: dict[str, int] = field(default_factory=dict)
    degenerate_std: list[dict[str, str]] = field(default_factory=list)
    discarded_segments: list[dict[str, Any]] = field(default_factory=list)
    before_total: int = 0
    after_total: int = 0

    @property
    def frames_removed(self) -> int:
        return (
            self.frames_trimmed
            + self.frames_discarded_short
            + self.frames_threshold_dropped
            + self.outlier_frames_dropped
        )

    @property
    def empty_output(self) -> bool:
        return self.before_total > 0 and self.after_total == 0

    def absorb(self, other: "CleaningReport") -> None:
        """Fold another report's counts into this one (totals excluded)."""
        self.interpolated_points += other.interpolated_points
        self.frames_trimmed += other.frames_trimmed
        self.frames_discarded_short += other.frames_discarded_short
        self.frames_threshold_dropped += other.frames_threshold_dropped
        self.speed_floor_dropped += other.speed_floor_dropped
        self.accel_bound_dropped += other.accel_bound_dropped
        self.outlier_frames_dropped += other.outlier_frames_dropped
        for feat, n in other.outliers_removed.items():
            self.outliers_removed[feat] = self.outliers_removed.get(feat, 0) + n
        self.degenerate_std.extend(other.degenerate_std)
        self.discarded_segments.extend(other.discarded_segments)

    def merge(self, other: "CleaningReport") -> "CleaningReport":
        """Associative merge of reports for disjoint trajectory sets."""
        out = CleaningReport(
            before_total=self.before_total + other.before_total,
            after_total=self.after_total + other.after_total,
        )
        out.absorb(self)
        out.absorb(other)
        return out

    def to_json_dict(self) -> dict[str, Any]:
        doc = asdict(self)
        doc["outliers_removed"] = dict(sorted(self.outliers_removed.items()))
        doc["frames_removed"] = self.frames_removed
        doc["empty_output"] = self.empty_output
        return doc


def interpolate_gaps(track: VehicleTrack, max_gap: int) -> list[VehicleTrack]:
    """Fill short runs of invalid fixes by linear interpolation.

    Runs of at most ``max_gap`` invalid fixes between two valid fixes are
    replaced field-by-field (linear against time, time itself reconstructed
    linearly); filled fixes stay flagged. Longer runs split the track, and
    leading/trailing invalid fixes are dropped. Every resulting segment is
    re-validated against the 15 s minimum and dropped when shorter.
    """
    valid_idx = [i for i, f in enumerate(track.fixes) if f.valid]
    if len(valid_idx) < 2:
        raise AllInvalid(
            f"track {track.vehicle_id!r} has {len(valid_idx)} valid fixes; need at least 2"
        )

    segments: list[list[GpsFix]] = []
    current: list[GpsFix] = [track.fixes[valid_idx[0]]]
    for a, b in zip(valid_idx, valid_idx[1:]):
        gap = b - a - 1
        if gap == 0:
            current.append(track.fixes[b])
            continue
        if gap > max_gap:
            segments.append(current)
            current = [track.fixes[b]]
            continue
        fa, fb = track.fixes[a], track.fixes[b]
        for j in range(a + 1, b):
            w = (j - a) / (b - a)
            t = fa.t + w * (fb.t - fa.t)

            def lerp(x0: float, x1: float) -> float:
                if math.isfinite(x0) and math.isfinite(x1):
                    return x0 + (x1 - x0) * (t - fa.t) / (fb.t - fa.t)
                return math.nan

            current.append(
                GpsFix(
                    t=t,
                    lat=lerp(fa.lat, fb.lat),
                    lon=lerp(fa.lon, fb.lon),
                    speed=lerp(fa.speed, fb.speed),
                    alt=lerp(fa.alt, fb.alt),
                    spacing=lerp(fa.spacing, fb.spacing),
                    accel=lerp(fa.accel, fb.accel),
                    valid=False,
                )
            )
        current.append(fb)
    segments.append(current)

    min_len = MIN_TRAJECTORY_SECONDS * track.sample_rate_hz
    return [
        replace(track, fixes=tuple(seg))
        for seg in segments
        if len(seg) >= min_len - _EPS
    ]


def interpolated_count(track: VehicleTrack) -> int:
    """Number of gap-filled fixes in an interpolated track."""
    return sum(1 for f in track.fixes if not f.valid)


def feature_moments(
    frames: Iterable[UniformFrame], features: Sequence[str]
) -> dict[str, tuple[float, float]]:
    """Mean and sample (n-1) standard deviation per feature, in one pass."""
    frames = list(frames)
    moments: dict[str, tuple[float, float]] = {}
    for feat in features:
        x = np.array([getattr(fr, feat) for fr in frames], dtype=float)
        moments[feat] = (float(np.mean(x)), float(np.std(x, ddof=1)))
    return moments


def remove_outliers(
    traj: CfTrajectory,
    cfg: CleaningConfig,
    moments: Mapping[str, tuple[float, float]] | None = None,
) -> tuple[CfTrajectory, CleaningReport]:
    """Drop frames with any configured feature outside mean +/- k*sigma.

    Statistics come from the frames entering this stage (or from ``moments``
    when the dataset-wide scope supplies pooled ones) and are applied in a
    single pass; survivors are re-indexed gaplessly. A feature whose sigma is
    zero removes nothing and records a DegenerateStd warning instead.
    """
    if len(traj.frames) < 2:
        raise TooFewSamples("outlier removal needs at least 2 frames")
    report = CleaningReport(before_total=len(traj.frames))
    if moments is None:
        moments = feature_moments(traj.frames, cfg.outlier_features)

    drop = np.zeros(len(traj.frames), dtype=bool)
    for feat in cfg.outlier_features:
        mu, sigma = moments[feat]
        if sigma == 0.0:
            report.degenerate_std.append({"traj_id": traj.traj_id, "feature": feat})
            continue
        x = traj.feature(feat)
        mask = (x < mu - cfg.sigma_k * sigma) | (x > mu + cfg.sigma_k * sigma)
        count = int(mask.sum())
        if count:
            report.outliers_removed[feat] = report.outliers_removed.get(feat, 0) + count
        drop |= mask

    report.outlier_frames_dropped = int(drop.sum())
    kept = [fr for fr, d in zip(traj.frames, drop) if not d]
    out = replace(traj, frames=reindex_frames(traj.traj_id, kept))
    report.after_total = len(out.frames)
    return out, report


def trim_unstable(
    traj: CfTrajectory, windows: Sequence[tuple[float, float]] | None
) -> tuple[list[CfTrajectory], CleaningReport]:
    """Keep only frames inside the given keep-windows.

    Windows are ``[t_start, t_end)`` in seconds from the trajectory start
    (frame time = frame_id / rate). ``None`` or an empty list keeps
    everything. Each surviving window becomes its own re-indexed segment;
    segments shorter than 15 s are discarded entirely with a report entry.
    """
    report = CleaningReport(before_total=len(traj.frames))
    if not windows:
        report.after_total = len(traj.frames)
        return [traj], report

    windows = sorted((float(a), float(b)) for a, b in windows)
    for (a0, b0), (a1, _) in zip(windows, windows[1:]):
        if a1 < b0:
            raise ConfigError(f"trim windows overlap: [{a0}, {b0}) and [{a1}, ...)")
    for a, b in windows:
        if b < a:
            raise ConfigError(f"trim window [{a}, {b}) is reversed")

    times = traj.frame_times()
    segments: list[CfTrajectory] = []
    kept_total = 0
    for k, (a, b) in enumerate(windows):
        inside = [fr for fr, t in zip(traj.frames, times) if a - _EPS <= t < b - _EPS]
        if not inside:
            continue
        duration = len(inside) / traj.sample_rate_hz
        if duration < MIN_TRAJECTORY_SECONDS - _EPS:
            report.frames_discarded_short += len(inside)
            report.discarded_segments.append(
                {
                    "traj_id": traj.traj_id,
                    "window": [a, b],
                    "duration_s": duration,
                    "frames": len(inside),
                }
            )
            continue
        kept_total += len(inside)
        segments.append(replace(traj, frames=reindex_frames(traj.traj_id, inside)))

    if len(segments) > 1:
        segments = [
            replace(seg, traj_id=f"{traj.traj_id}#w{k}",
                    frames=reindex_frames(f"{traj.traj_id}#w{k}", seg.frames))
            for k, seg in enumerate(segments)
        ]
    report.frames_trimmed = (
        len(traj.frames) - kept_total - report.frames_discarded_short
    )
    report.after_total = kept_total
    return segments, report


def apply_threshold_filters(
    traj: CfTrajectory, cfg: CleaningConfig
) -> tuple[CfTrajectory, CleaningReport]:
    """Drop near-standstill frames and out-of-bound accelerations.

    A frame goes when a vehicle speed sits below the floor (both vehicles, in
    "both" mode) or when |follower_acceleration| strictly exceeds the bound;
    values exactly at the bound stay. Survivors are re-indexed.
    """
    report = CleaningReport(before_total=len(traj.frames))
    leader = traj.feature("leader_speed")
    follower = traj.feature("follower_speed")
    accel = traj.feature("follower_acceleration")

    low_leader = leader < cfg.speed_floor
    low_follower = follower < cfg.speed_floor
    if cfg.speed_floor_mode == "either":
        slow = low_leader | low_follower
    else:
        slow = low_leader & low_follower
    fast_accel = np.abs(accel) > cfg.accel_bound

    drop = slow | fast_accel
    report.speed_floor_dropped = int(slow.sum())
    report.accel_bound_dropped = int(fast_accel.sum())
    report.frames_threshold_dropped = int(drop.sum())

    kept = [fr for fr, d in zip(traj.frames, drop) if not d]
    out = replace(traj, frames=reindex_frames(traj.traj_id, kept))
    report.after_total = len(out.frames)
    return out, report


def clean_pipeline(
    traj: CfTrajectory, cfg: CleaningConfig
) -> tuple[list[CfTrajectory], CleaningReport]:
    """Run trim -> threshold filters -> outlier removal on one trajectory.

    Gap interpolation already happened upstream on the vehicle tracks.
    Trimming may split the trajectory, so a list of cleaned segments comes
    back; an empty list (with the report flagging empty output) means nothing
    survived.
    """
    report = CleaningReport(before_total=len(traj.frames))
    segments, trim_report = trim_unstable(traj, cfg.trim_windows.get(traj.traj_id))
    report.absorb(trim_report)

    cleaned: list[CfTrajectory] = []
    for seg in segments:
        seg, th_report = apply_threshold_filters(seg, cfg)
        report.absorb(th_report)
        if len(seg.frames) >= 2:
            seg, out_report = remove_outliers(seg, cfg)
            report.absorb(out_report)
        if seg.frames:
            cleaned.append(seg)

    report.after_total = sum(len(t.frames) for t in cleaned)
    return cleaned, report


def clean_corpus(
    trajectories: Iterable[CfTrajectory], cfg: CleaningConfig
) -> tuple[list[CfTrajectory], CleaningReport]:
    """Clean a whole corpus, honoring the configured outlier scope.

    With ``outlier_scope="dataset"`` the sigma bands are computed once over
    every frame that survived trimming and threshold filters, then applied to
    each trajectory.
    """
    ordered = sorted(trajectories, key=lambda t: t.traj_id)
    total = CleaningReport(before_total=sum(len(t.frames) for t in ordered))

    if cfg.outlier_scope == "trajectory":
        cleaned: list[CfTrajectory] = []
        for traj in ordered:
            segs, rep = clean_pipeline(traj, cfg)
            total.absorb(rep)
            cleaned.extend(segs)
        total.after_total = sum(len(t.frames) for t in cleaned)
        return cleaned, total

    staged: list[CfTrajectory] = []
    for traj in ordered:
        segments, trim_report = trim_unstable(traj, cfg.trim_windows.get(traj.traj_id))
        total.absorb(trim_report)
        for seg in segments:
            seg, th_report = apply_threshold_filters(seg, cfg)
            total.absorb(th_report)
            if seg.frames:
                staged.append(seg)

    pooled_frames = [fr for traj in staged for fr in traj.frames]
    cleaned = []
    if len(pooled_frames) >= 2:
        moments = feature_moments(pooled_frames, cfg.outlier_features)
        for traj in staged:
            if len(traj.frames) < 2:
                cleaned.append(traj)
                continue
            traj, out_report = remove_outliers(traj, cfg, moments=moments)
            total.absorb(out_report)
            if traj.frames:
                cleaned.append(traj)
    else:
        cleaned = staged

    total.after_total = sum(len(t.frames) for t in cleaned)
    return cleaned, total
