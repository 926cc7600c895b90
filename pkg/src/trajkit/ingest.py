"""Dataset adapters: parse source CSV layouts into vehicle tracks and pair them.

Three source layouts are supported:

* ``wide_multi_vehicle`` - one CSV, each row holds one frame for every vehicle
  in a platoon (OpenACC-style).
* ``paired_two_vehicle`` - one CSV, each row holds one frame for a fixed
  leader/follower pair (Vanderbilt-style).
* ``per_vehicle_files`` - one CSV per vehicle, platoon order given by file
  order (CATS-style; XLSX workbooks must be exported sheet-per-CSV first).

The source column names of the published datasets are not standardized, so
every binding in the built-in profiles can be overridden from configuration.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import (
    ConfigError,
    EmptyFile,
    InsufficientOverlap,
    MissingColumn,
    NonAdjacentPair,
    NonMonotoneTime,
    UnknownProfile,
)
from .model import (
    MIN_TRAJECTORY_SECONDS,
    CfTrajectory,
    GpsFix,
    UniformFrame,
    VehicleTrack,
    VehicleType,
)

LAYOUTS = ("wide_multi_vehicle", "paired_two_vehicle", "per_vehicle_files")

# Semantic fields a slot may bind to a source column.
SEMANTIC_FIELDS = ("time", "lat", "lon", "alt", "speed", "spacing", "acceleration")

# Slot keys that are literals rather than column bindings.
SLOT_META_KEYS = ("vehicle_id", "vehicle_type")

_GRID_EPS = 1e-9


@dataclass(frozen=True)
class DatasetProfile:
    """How to read one source dataset layout.

    ``slots`` maps semantic fields to source column names, one dict per
    vehicle slot front-to-back (plus optional ``vehicle_id`` / ``vehicle_type``
    literals). ``slot_pattern`` is the template alternative for wide layouts:
    ``{i}`` expands to the 1-based slot number and ``{p}`` to its predecessor,
    with as many slots as the file's header supports. ``time_unit`` converts
    raw timestamps to seconds.
    """

    name: str
    layout: str
    declared_rate_hz: float
    slots: tuple[Mapping[str, str], ...] = ()
    slot_pattern: Mapping[str, str] | None = None
    time_unit: float = 1.0

    def __post_init__(self) -> None:
        if self.layout not in LAYOUTS:
            raise ConfigError(f"unknown layout {self.layout!r}; expected one of {LAYOUTS}")
        if self.declared_rate_hz <= 0:
            raise ConfigError("declared_rate_hz must be positive")
        if self.time_unit <= 0:
            raise ConfigError("time_unit must be positive")
        if not self.slots and self.slot_pattern is None:
            raise ConfigError("profile needs explicit slots or a slot_pattern")
        for slot in self.slots:
            self._check_slot(slot)
        if self.slot_pattern is not None:
            self._check_slot(self.slot_pattern)

    @staticmethod
    def _check_slot(slot: Mapping[str, str]) -> None:
        unknown = set(slot) - set(SEMANTIC_FIELDS) - set(SLOT_META_KEYS)
        if unknown:
            raise ConfigError(f"unknown slot keys: {sorted(unknown)}")
        if "time" not in slot or "speed" not in slot:
            raise ConfigError("every vehicle slot must bind at least time and speed")


@dataclass(frozen=True)
class PlatoonRecord:
    """One platoon: per-vehicle tracks in front-to-back order."""

    tracks: tuple[VehicleTrack, ...]
    source: str = ""

    @property
    def vehicle_ids(self) -> tuple[str, ...]:
        return tuple(t.vehicle_id for t in self.tracks)


def builtin_profile(name: str) -> DatasetProfile:
    """Hard-coded column maps for the three supported source datasets."""
    if name == "openacc":
        return DatasetProfile(
            name="openacc",
            layout="wide_multi_vehicle",
            declared_rate_hz=10.0,
            slot_pattern={
                "time": "Time",
                "speed": "Speed{i}",
                "lat": "Lat{i}",
                "lon": "Lon{i}",
                "alt": "Alt{i}",
                "spacing": "IVS{p}",
            },
        )
    if name == "vanderbilt":
        return DatasetProfile(
            name="vanderbilt",
            layout="paired_two_vehicle",
            declared_rate_hz=10.0,
            slots=(
                {"time": "time", "speed": "leader_speed", "vehicle_id": "leader"},
                {
                    "time": "time",
                    "speed": "follower_speed",
                    "spacing": "spacing",
                    "acceleration": "follower_acceleration",
                    "vehicle_id": "follower",
                },
            ),
        )
    if name == "cats":
        return DatasetProfile(
            name="cats",
            layout="per_vehicle_files",
            declared_rate_hz=1.0,
            slots=({"time": "time", "lat": "latitude", "lon": "longitude", "speed": "speed"},),
        )
    raise UnknownProfile(f"no built-in profile named {name!r}")


def profile_from_json(doc: Mapping[str, Any]) -> DatasetProfile:
    """Build a profile from a JSON document, optionally overriding a built-in.

    A ``base`` key starts from :func:`builtin_profile`; remaining keys mirror
    the DatasetProfile fields and replace the base values.
    """
    doc = dict(doc)
    base_name = doc.pop("base", None)
    if base_name is not None:
        base = builtin_profile(str(base_name))
    elif "layout" in doc and "declared_rate_hz" in doc:
        base = None
    else:
        raise ConfigError("custom profile needs either 'base' or layout + declared_rate_hz")

    fields: dict[str, Any] = {}
    for key in ("name", "layout", "declared_rate_hz", "time_unit"):
        if key in doc:
            fields[key] = doc.pop(key)
    if "slots" in doc:
        fields["slots"] = tuple(dict(s) for s in doc.pop("slots"))
    if "slot_pattern" in doc:
        pattern = doc.pop("slot_pattern")
        fields["slot_pattern"] = dict(pattern) if pattern is not None else None
    if doc:
        raise ConfigError(f"unknown profile keys: {sorted(doc)}")

    if base is None:
        fields.setdefault("name", "custom")
        return DatasetProfile(**fields)
    return replace(base, **fields)


def _expand_pattern(pattern: Mapping[str, str], header: Sequence[str]) -> list[dict[str, str]]:
    """Expand ``{i}``/``{p}`` column templates against an actual header."""
    cols = set(header)
    slots: list[dict[str, str]] = []
    i = 1
    while True:
        slot: dict[str, str] = {}
        for key, tpl in pattern.items():
            if key in SLOT_META_KEYS:
                slot[key] = tpl
                continue
            name = tpl.replace("{i}", str(i)).replace("{p}", str(i - 1))
            if name in cols:
                slot[key] = name
            elif key in ("time", "speed"):
                slot = {}
                break
        if not slot:
            break
        slots.append(slot)
        i += 1
    if len(slots) < 2:
        raise MissingColumn(
            pattern.get("speed", "speed").replace("{i}", str(max(len(slots) + 1, 2)))
        )
    return slots


def _parse_cell(cell: str) -> float:
    try:
        return float(cell)
    except ValueError:
        return math.nan


def _read_rows(path: Path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyFile(f"{path} has no header row")
        rows = [row for row in reader if any(cell.strip() for cell in row)]
    if not rows:
        raise EmptyFile(f"{path} has no data rows")
    return [h.strip() for h in header], rows


def _slot_track(
    slot: Mapping[str, str],
    header: Sequence[str],
    rows: Sequence[Sequence[str]],
    profile: DatasetProfile,
    default_id: str,
    default_type: VehicleType,
    path: Path,
) -> VehicleTrack:
    """Parse one vehicle slot out of the row set.

    Unparseable cells in bound columns flag the fix invalid instead of
    dropping the row, so the fix count always equals the row count.
    """
    index = {name: i for i, name in enumerate(header)}
    col_of: dict[str, int] = {}
    for fld in SEMANTIC_FIELDS:
        if fld in slot:
            if slot[fld] not in index:
                raise MissingColumn(slot[fld])
            col_of[fld] = index[slot[fld]]

    period = 1.0 / profile.declared_rate_hz
    fixes: list[GpsFix] = []
    prev_t: float | None = None
    for row_no, row in enumerate(rows, start=2):  # 1-based, after the header
        values = {
            fld: _parse_cell(row[col]) if col < len(row) else math.nan
            for fld, col in col_of.items()
        }
        t = values.pop("time", math.nan) * profile.time_unit
        valid = math.isfinite(t) and all(math.isfinite(v) for v in values.values())

        lat = values.get("lat", math.nan)
        lon = values.get("lon", math.nan)
        if math.isfinite(lat) and not -90.0 <= lat <= 90.0:
            lat, valid = math.nan, False
        if math.isfinite(lon) and not -180.0 <= lon <= 180.0:
            lon, valid = math.nan, False
        speed = values.get("speed", math.nan)
        if math.isfinite(speed) and speed < 0.0:
            speed, valid = math.nan, False

        if math.isfinite(t) and prev_t is not None and t <= prev_t:
            if prev_t - t > period + _GRID_EPS:
                raise NonMonotoneTime(
                    row_no, f"{path}: time goes from {prev_t} back to {t} at row {row_no}"
                )
            t, valid = math.nan, False
        if math.isfinite(t):
            prev_t = t

        fixes.append(
            GpsFix(
                t=t,
                lat=lat,
                lon=lon,
                speed=speed,
                alt=values.get("alt", math.nan),
                spacing=values.get("spacing", math.nan),
                accel=values.get("acceleration", math.nan),
                valid=valid,
            )
        )

    vtype = slot.get("vehicle_type")
    return VehicleTrack(
        vehicle_id=slot.get("vehicle_id", default_id),
        vehicle_type=VehicleType[vtype] if vtype else default_type,
        sample_rate_hz=profile.declared_rate_hz,
        fixes=tuple(fixes),
    )


def ingest_file(
    path: str | Path | Sequence[str | Path], profile: DatasetProfile
) -> PlatoonRecord:
    """Parse one source file (or file set) into a platoon of vehicle tracks.

    For ``per_vehicle_files`` layouts, ``path`` is a directory or an explicit
    list of files; lexicographic file order defines the front-to-back platoon
    order. Other layouts take a single CSV path.
    """
    if profile.layout == "per_vehicle_files":
        if isinstance(path, (str, Path)):
            root = Path(path)
            files = sorted(p for p in root.iterdir() if p.suffix.lower() == ".csv")
        else:
            files = [Path(p) for p in path]
        if len(files) < 2:
            raise ConfigError(f"per-vehicle layout needs at least 2 files, found {len(files)}")
        slot = profile.slots[0]
        tracks = []
        for i, f in enumerate(files):
            header, rows = _read_rows(f)
            tracks.append(
                _slot_track(
                    slot, header, rows, profile,
                    default_id=f.stem,
                    default_type=VehicleType.HV if i == 0 else VehicleType.AV,
                    path=f,
                )
            )
        # vehicle_id literals would collide across files; prefer file stems
        tracks = [replace(t, vehicle_id=f.stem) for t, f in zip(tracks, files)]
        source = str(files[0].parent)
        return PlatoonRecord(tracks=tuple(tracks), source=source)

    fpath = Path(path)  # type: ignore[arg-type]
    header, rows = _read_rows(fpath)
    slots = (
        _expand_pattern(profile.slot_pattern, header)
        if profile.slot_pattern is not None and not profile.slots
        else [dict(s) for s in profile.slots]
    )
    if len(slots) < 2:
        raise ConfigError("platoon layouts need at least 2 vehicle slots")
    tracks = tuple(
        _slot_track(
            slot, header, rows, profile,
            default_id=f"v{i + 1}",
            default_type=VehicleType.HV if i == 0 else VehicleType.AV,
            path=fpath,
        )
        for i, slot in enumerate(slots)
    )
    return PlatoonRecord(tracks=tracks, source=str(fpath))


def _usable(track: VehicleTrack) -> np.ndarray:
    return np.isfinite(track.times())


def pair_grid(
    leader: VehicleTrack, follower: VehicleTrack, rate_hz: float
) -> np.ndarray:
    """Common timestamp grid for a pair: the leader's samples inside the
    overlap window. Raises when the overlap is below the 15 s minimum."""
    lt = leader.times()[_usable(leader)]
    ft = follower.times()[_usable(follower)]
    if lt.size == 0 or ft.size == 0:
        raise InsufficientOverlap(0.0)
    t0 = max(lt[0], ft[0])
    t1 = min(lt[-1], ft[-1])
    overlap = t1 - t0
    if overlap < MIN_TRAJECTORY_SECONDS - _GRID_EPS:
        raise InsufficientOverlap(float(max(overlap, 0.0)))
    return lt[(lt >= t0 - _GRID_EPS) & (lt <= t1 + _GRID_EPS)]


def _interp_channel(grid: np.ndarray, times: np.ndarray, values: np.ndarray) -> np.ndarray:
    mask = np.isfinite(times) & np.isfinite(values)
    if not mask.any():
        return np.full(grid.shape, math.nan)
    return np.interp(grid, times[mask], values[mask])


def resample_track(track: VehicleTrack, grid: np.ndarray) -> VehicleTrack:
    """Linearly interpolate every channel onto ``grid``.

    Exact no-op on samples that already sit on the grid. A resampled fix is
    flagged valid only when it does not straddle an originally-invalid fix.
    """
    times = track.times()
    channels = {
        name: _interp_channel(grid, times, track.channel(name))
        for name in ("lat", "lon", "speed", "alt", "spacing", "accel")
    }
    validity = _interp_channel(grid, times, track.valid_mask().astype(float))
    fixes = tuple(
        GpsFix(
            t=float(grid[i]),
            lat=float(channels["lat"][i]),
            lon=float(channels["lon"][i]),
            speed=float(channels["speed"][i]),
            alt=float(channels["alt"][i]),
            spacing=float(channels["spacing"][i]),
            accel=float(channels["accel"][i]),
            valid=bool(validity[i] >= 1.0 - 1e-12),
        )
        for i in range(grid.size)
    )
    return replace(track, fixes=fixes)


def build_pair_trajectory(
    traj_id: str,
    leader: VehicleTrack,
    follower: VehicleTrack,
    rate_hz: float,
    provenance: Mapping[str, Any] | None = None,
) -> CfTrajectory:
    """Assemble a raw trajectory from two already-aligned tracks.

    Spacing and follower acceleration stay NaN unless the source provided
    them; the kinematics pass fills the gaps.
    """
    frames = tuple(
        UniformFrame(
            traj_id=traj_id,
            frame_id=i,
            leader_id=leader.vehicle_id,
            leader_type=int(leader.vehicle_type),
            leader_speed=lf.speed,
            follower_id=follower.vehicle_id,
            follower_type=int(follower.vehicle_type),
            follower_speed=ff.speed,
            follower_acceleration=ff.accel,
            spacing=ff.spacing,
            speed_diff=math.nan,
        )
        for i, (lf, ff) in enumerate(zip(leader.fixes, follower.fixes))
    )
    return CfTrajectory(
        traj_id=traj_id,
        sample_rate_hz=rate_hz,
        frames=frames,
        provenance=dict(provenance or {}),
    )


def pair_tracks(
    platoon: PlatoonRecord, leader_idx: int, follower_idx: int, traj_id: str
) -> CfTrajectory:
    """Extract one adjacent leader-follower pair as a raw trajectory.

    Both tracks are resampled onto the leader's grid over their common time
    window; spacing/acceleration are filled later by the kinematics pass.
    """
    if follower_idx != leader_idx + 1:
        raise NonAdjacentPair(
            f"slots {leader_idx} and {follower_idx} are not adjacent in platoon order"
        )
    leader = platoon.tracks[leader_idx]
    follower = platoon.tracks[follower_idx]
    grid = pair_grid(leader, follower, leader.sample_rate_hz)
    leader_rs = resample_track(leader, grid)
    follower_rs = resample_track(follower, grid)
    provenance = {
        "source": platoon.source,
        "leader_slot": leader_idx,
        "follower_slot": follower_idx,
        "rate_hz": leader.sample_rate_hz,
        "window_s": [float(grid[0]), float(grid[-1])],
    }
    return build_pair_trajectory(
        traj_id, leader_rs, follower_rs, leader.sample_rate_hz, provenance
    )
