"""Shared domain types and the uniform car-following schema.

All values are SI (meters, seconds, m/s, m/s^2). Types are immutable value
objects: safe to share between threads, never mutated in place.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from enum import IntEnum
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .errors import SchemaMismatch

# Shortest car-following episode worth keeping, in seconds.
MIN_TRAJECTORY_SECONDS = 15.0

# Column order of the uniform CSV. The header must be byte-identical to this.
UNIFORM_CSV_HEADER = (
    "traj_id",
    "frame_id",
    "leader_id",
    "leader_type",
    "leader_speed",
    "follower_id",
    "follower_type",
    "follower_speed",
    "follower_acceleration",
    "spacing",
    "speed_diff",
)

FLOAT_DECIMALS = 6

# Tolerance for the per-row speed_diff identity; covers 6-decimal CSV rounding.
SPEED_DIFF_TOL = 2e-6


class VehicleType(IntEnum):
    HV = 0
    AV = 1


@dataclass(frozen=True)
class GpsFix:
    """One timestamped GPS sample for a single vehicle.

    ``spacing`` and ``accel`` hold source-provided values (distance to the
    vehicle ahead, own acceleration) for datasets that publish them; they stay
    NaN when the source has no such column. ``valid`` is False for fixes whose
    bound fields were originally missing (possibly filled later by
    interpolation).
    """

    t: float
    lat: float = math.nan
    lon: float = math.nan
    speed: float = math.nan
    alt: float = math.nan
    spacing: float = math.nan
    accel: float = math.nan
    valid: bool = True


# Numeric GpsFix channels, in interpolation order. ``t`` is handled separately.
FIX_CHANNELS = ("lat", "lon", "speed", "alt", "spacing", "accel")


@dataclass(frozen=True)
class VehicleTrack:
    """Ordered GPS samples of one vehicle at a declared fixed rate."""

    vehicle_id: str
    vehicle_type: VehicleType
    sample_rate_hz: float
    fixes: tuple[GpsFix, ...]

    @property
    def duration_s(self) -> float:
        return len(self.fixes) / self.sample_rate_hz

    def times(self) -> np.ndarray:
        return np.array([f.t for f in self.fixes], dtype=float)

    def channel(self, name: str) -> np.ndarray:
        return np.array([getattr(f, name) for f in self.fixes], dtype=float)

    def valid_mask(self) -> np.ndarray:
        return np.array([f.valid for f in self.fixes], dtype=bool)


@dataclass(frozen=True)
class UniformFrame:
    """One leader-follower observation in the uniform schema."""

    traj_id: str
    frame_id: int
    leader_id: str
    leader_type: int
    leader_speed: float
    follower_id: str
    follower_type: int
    follower_speed: float
    follower_acceleration: float
    spacing: float
    speed_diff: float


@dataclass(frozen=True)
class CfTrajectory:
    """A car-following trajectory: one leader-follower pair over time.

    Absolute time is implicit: frame ``i`` sits at ``frame_id / sample_rate_hz``
    seconds from the trajectory start. ``provenance`` records the source
    dataset, file, and extraction parameters; it is JSON-serializable and
    treated as read-only.
    """

    traj_id: str
    sample_rate_hz: float
    frames: tuple[UniformFrame, ...]
    provenance: Mapping[str, Any] = field(default_factory=dict)

    @property
    def duration_s(self) -> float:
        return len(self.frames) / self.sample_rate_hz

    def feature(self, name: str) -> np.ndarray:
        return np.array([getattr(f, name) for f in self.frames], dtype=float)

    def frame_times(self) -> np.ndarray:
        return np.array([f.frame_id for f in self.frames], dtype=float) / self.sample_rate_hz


@dataclass(frozen=True)
class Violation:
    """One violated trajectory invariant. Violations are data, not errors."""

    kind: str
    frame_id: int | None = None
    value: float | None = None
    message: str = ""


def _finite(x: float) -> bool:
    return math.isfinite(x)


def validate_trajectory(traj: CfTrajectory) -> list[Violation]:
    """Check every CfTrajectory invariant; return one descriptor per violation.

    Never mutates its input and is idempotent. Frames whose spacing,
    acceleration, or speed_diff are still NaN (not yet derived) yield
    ``UnsetField`` violations rather than arithmetic ones.
    """
    violations: list[Violation] = []

    duration = traj.duration_s
    if duration < MIN_TRAJECTORY_SECONDS - 1e-9:
        violations.append(
            Violation("TooShort", value=duration, message=f"duration {duration:.3f} s < 15 s")
        )

    if not traj.frames:
        return violations

    first = traj.frames[0]
    prev_id: int | None = None
    for fr in traj.frames:
        if fr.frame_id < 0 or (prev_id is not None and fr.frame_id != prev_id + 1):
            violations.append(
                Violation("NonContiguousFrameIds", frame_id=fr.frame_id,
                          message="frame_id must increase gaplessly from its start")
            )
        prev_id = fr.frame_id

        if fr.leader_id != first.leader_id or fr.follower_id != first.follower_id:
            violations.append(
                Violation("MixedPairIds", frame_id=fr.frame_id,
                          message="all frames must share one leader/follower pair")
            )

        unset = [
            name
            for name in ("spacing", "follower_acceleration", "speed_diff")
            if not _finite(getattr(fr, name))
        ]
        if unset:
            violations.append(
                Violation("UnsetField", frame_id=fr.frame_id, message=", ".join(unset))
            )

        if _finite(fr.spacing) and fr.spacing < 0:
            violations.append(Violation("NegativeSpacing", frame_id=fr.frame_id, value=fr.spacing))

        if (
            _finite(fr.speed_diff)
            and _finite(fr.leader_speed)
            and _finite(fr.follower_speed)
            and abs(fr.speed_diff - (fr.leader_speed - fr.follower_speed)) > SPEED_DIFF_TOL
        ):
            violations.append(
                Violation("SpeedDiffMismatch", frame_id=fr.frame_id, value=fr.speed_diff)
            )

    return violations


def reindex_frames(traj_id: str, frames: Sequence[UniformFrame]) -> tuple[UniformFrame, ...]:
    """Renumber frames gaplessly from 0 and stamp them with ``traj_id``."""
    return tuple(
        replace(fr, traj_id=traj_id, frame_id=i) for i, fr in enumerate(frames)
    )


def _fmt(x: float) -> str:
    return f"{x:.{FLOAT_DECIMALS}f}"


def write_uniform_csv(path: str | Path, trajectories: Iterable[CfTrajectory]) -> None:
    """Write trajectories to one uniform CSV, sorted by traj_id then frame_id.

    Floats carry exactly 6 decimal places so identical inputs always produce
    byte-identical files.
    """
    ordered = sorted(trajectories, key=lambda t: t.traj_id)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(UNIFORM_CSV_HEADER)
        for traj in ordered:
            for fr in traj.frames:
                writer.writerow(
                    (
                        fr.traj_id,
                        fr.frame_id,
                        fr.leader_id,
                        fr.leader_type,
                        _fmt(fr.leader_speed),
                        fr.follower_id,
                        fr.follower_type,
                        _fmt(fr.follower_speed),
                        _fmt(fr.follower_acceleration),
                        _fmt(fr.spacing),
                        _fmt(fr.speed_diff),
                    )
                )


def read_uniform_csv(
    path: str | Path,
    sample_rate_hz: float,
    provenance: Mapping[str, Any] | None = None,
) -> list[CfTrajectory]:
    """Read a uniform CSV back into trajectories, grouped by traj_id.

    The schema has no time column, so the caller supplies the sample rate
    (recorded in provenance by the writer side).
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != UNIFORM_CSV_HEADER:
            raise SchemaMismatch(
                f"expected uniform header {','.join(UNIFORM_CSV_HEADER)!r}, "
                f"got {','.join(header) if header else '<empty file>'!r}"
            )
        grouped: dict[str, list[UniformFrame]] = {}
        for row in reader:
            if not row:
                continue
            fr = UniformFrame(
                traj_id=row[0],
                frame_id=int(row[1]),
                leader_id=row[2],
                leader_type=int(row[3]),
                leader_speed=float(row[4]),
                follower_id=row[5],
                follower_type=int(row[6]),
                follower_speed=float(row[7]),
                follower_acceleration=float(row[8]),
                spacing=float(row[9]),
                speed_diff=float(row[10]),
            )
            grouped.setdefault(fr.traj_id, []).append(fr)

    return [
        CfTrajectory(
            traj_id=traj_id,
            sample_rate_hz=sample_rate_hz,
            frames=tuple(frames),
            provenance=dict(provenance or {}),
        )
        for traj_id, frames in grouped.items()
    ]
