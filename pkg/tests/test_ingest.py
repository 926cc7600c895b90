"""Source layout parsing, profiles, and track pairing."""
import math

import numpy as np
import pytest

from trajkit.errors import (
    EmptyFile,
    InsufficientOverlap,
    MissingColumn,
    NonAdjacentPair,
    NonMonotoneTime,
    UnknownProfile,
)
from trajkit.ingest import (
    DatasetProfile,
    PlatoonRecord,
    builtin_profile,
    ingest_file,
    pair_grid,
    pair_tracks,
    profile_from_json,
    resample_track,
)
from trajkit.model import GpsFix, VehicleTrack, VehicleType, validate_trajectory

WIDE_PROFILE = DatasetProfile(
    name="custom",
    layout="wide_multi_vehicle",
    declared_rate_hz=10.0,
    slot_pattern={"time": "Time", "speed": "Speed{i}", "lat": "Lat{i}", "lon": "Lon{i}"},
)


def write_wide(path, n_rows=10, n_vehicles=3, blank=None):
    header = ["Time"]
    for i in range(1, n_vehicles + 1):
        header += [f"Speed{i}", f"Lat{i}", f"Lon{i}"]
    lines = [",".join(header)]
    for r in range(n_rows):
        row = [f"{r * 0.1:.1f}"]
        for i in range(n_vehicles):
            row += [f"{20.0 + i:.3f}", f"{0.001 * r:.6f}", "0.000000"]
        lines.append(",".join(row))
    if blank is not None:
        r, c = blank
        cells = lines[r + 1].split(",")
        cells[c] = ""
        lines[r + 1] = ",".join(cells)
    path.write_text("\n".join(lines) + "\n")


def test_wide_file_parses_losslessly(tmp_path):
    path = tmp_path / "wide.csv"
    write_wide(path, n_rows=10, n_vehicles=3)
    platoon = ingest_file(path, WIDE_PROFILE)
    assert len(platoon.tracks) == 3
    assert all(len(t.fixes) == 10 for t in platoon.tracks)
    assert platoon.vehicle_ids == ("v1", "v2", "v3")
    assert platoon.tracks[0].vehicle_type == VehicleType.HV
    assert platoon.tracks[1].vehicle_type == VehicleType.AV
    assert all(f.valid for t in platoon.tracks for f in t.fixes)


def test_blank_cell_flags_fix_invalid_but_keeps_row_count(tmp_path):
    path = tmp_path / "wide.csv"
    # Row 4 (0-based), Speed2 column sits at index 4.
    write_wide(path, n_rows=10, n_vehicles=3, blank=(4, 4))
    platoon = ingest_file(path, WIDE_PROFILE)
    track2 = platoon.tracks[1]
    assert len(track2.fixes) == 10
    assert not track2.fixes[4].valid
    assert math.isnan(track2.fixes[4].speed)
    # The other tracks are untouched.
    assert all(f.valid for f in platoon.tracks[0].fixes)


def test_missing_mapped_column_raises(tmp_path):
    path = tmp_path / "wide.csv"
    write_wide(path, n_rows=10, n_vehicles=2)
    profile = DatasetProfile(
        name="custom",
        layout="paired_two_vehicle",
        declared_rate_hz=10.0,
        slots=(
            {"time": "Time", "speed": "Speed1", "lat": "Latitude1"},
            {"time": "Time", "speed": "Speed2"},
        ),
    )
    with pytest.raises(MissingColumn) as err:
        ingest_file(path, profile)
    assert err.value.name == "Latitude1"


def test_empty_file_raises(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("Time,Speed1,Lat1,Lon1,Speed2,Lat2,Lon2\n")
    with pytest.raises(EmptyFile):
        ingest_file(path, WIDE_PROFILE)


def test_time_reversal_beyond_one_period_raises(tmp_path):
    path = tmp_path / "wide.csv"
    write_wide(path, n_rows=10, n_vehicles=2)
    lines = path.read_text().splitlines()
    cells = lines[6].split(",")
    cells[0] = "0.1"  # jumps back 0.4 s at 10 Hz
    lines[6] = ",".join(cells)
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(NonMonotoneTime) as err:
        ingest_file(path, WIDE_PROFILE)
    assert err.value.row == 7


def test_duplicate_timestamp_within_period_flags_invalid(tmp_path):
    path = tmp_path / "wide.csv"
    write_wide(path, n_rows=10, n_vehicles=2)
    lines = path.read_text().splitlines()
    cells = lines[6].split(",")
    cells[0] = "0.4"  # same as the previous row
    lines[6] = ",".join(cells)
    path.write_text("\n".join(lines) + "\n")
    platoon = ingest_file(path, WIDE_PROFILE)
    assert len(platoon.tracks[0].fixes) == 10
    assert not platoon.tracks[0].fixes[5].valid


def test_builtin_profiles():
    assert builtin_profile("openacc").declared_rate_hz == 10.0
    assert builtin_profile("cats").declared_rate_hz == 1.0
    assert builtin_profile("vanderbilt").layout == "paired_two_vehicle"
    with pytest.raises(UnknownProfile):
        builtin_profile("waymo")


def test_profile_override_from_json():
    profile = profile_from_json({"base": "openacc", "declared_rate_hz": 20.0})
    assert profile.name == "openacc"
    assert profile.declared_rate_hz == 20.0
    custom = profile_from_json(
        {
            "layout": "paired_two_vehicle",
            "declared_rate_hz": 5.0,
            "slots": [
                {"time": "t", "speed": "v1"},
                {"time": "t", "speed": "v2"},
            ],
        }
    )
    assert custom.name == "custom"


def test_per_vehicle_files_layout(tmp_path):
    for name, speed in (("a_lead", 20.0), ("b_mid", 19.0), ("c_tail", 18.0)):
        lines = ["time,latitude,longitude,speed"]
        for r in range(20):
            lines.append(f"{r},{0.0001 * r:.6f},0.0,{speed}")
        (tmp_path / f"{name}.csv").write_text("\n".join(lines) + "\n")
    platoon = ingest_file(tmp_path, builtin_profile("cats"))
    assert platoon.vehicle_ids == ("a_lead", "b_mid", "c_tail")
    assert all(len(t.fixes) == 20 for t in platoon.tracks)
    assert platoon.tracks[0].sample_rate_hz == 1.0


def _track(vehicle_id, times, speeds, rate=10.0):
    fixes = tuple(
        GpsFix(t=t, lat=0.0, lon=0.0, speed=s) for t, s in zip(times, speeds)
    )
    return VehicleTrack(
        vehicle_id=vehicle_id, vehicle_type=VehicleType.AV, sample_rate_hz=rate, fixes=fixes
    )


def test_pair_tracks_aligned_inputs_need_no_resampling():
    n = 3000
    times = [i * 0.1 for i in range(n)]
    platoon = PlatoonRecord(
        tracks=(
            _track("l", times, [20.0] * n),
            _track("f", times, [19.0] * n),
        )
    )
    traj = pair_tracks(platoon, 0, 1, "p")
    assert len(traj.frames) == 3000
    assert all(fr.leader_speed == 20.0 and fr.follower_speed == 19.0 for fr in traj.frames)
    kinds = {v.kind for v in validate_trajectory(traj)}
    assert kinds <= {"UnsetField"}  # spacing/accel/speed_diff still underived


def test_pair_tracks_interpolates_offset_follower_onto_leader_grid():
    leader_times = [i * 0.1 for i in range(300)]
    follower_times = [0.05 + i * 0.1 for i in range(300)]
    follower_speeds = [10.0 + 10.0 * t for t in follower_times]  # linear in t
    platoon = PlatoonRecord(
        tracks=(
            _track("l", leader_times, [20.0] * 300),
            _track("f", follower_times, follower_speeds),
        )
    )
    traj = pair_tracks(platoon, 0, 1, "p")
    # Grid = leader samples inside the common window [0.05, 29.95].
    assert traj.frames[0].frame_id == 0
    # Follower speed at grid t=0.1 interpolates (0.05, 10.5) and (0.15, 11.5) -> 11.0;
    # linearity makes every on-grid value exact.
    t_grid = 0.1
    idx = 0
    assert traj.frames[idx].follower_speed == pytest.approx(10.0 + 10.0 * t_grid, abs=1e-12)


def test_pair_tracks_midpoint_interpolation_example():
    # Follower sampled at t = 0.05, 0.15 with speeds 10.0, 11.0: the leader
    # grid point at t = 0.10 must get the midpoint 10.5.
    n = 200
    leader_times = [i * 0.1 for i in range(n)]
    follower_times = [0.05 + i * 0.1 for i in range(n)]
    follower_speeds = [10.0 + (1.0 if i % 2 else 0.0) for i in range(n)]
    platoon = PlatoonRecord(
        tracks=(
            _track("l", leader_times, [20.0] * n),
            _track("f", follower_times, follower_speeds),
        )
    )
    traj = pair_tracks(platoon, 0, 1, "p")
    assert traj.frames[0].follower_speed == pytest.approx(10.5)


def test_overlap_below_fifteen_seconds_rejected():
    times_l = [i * 0.1 for i in range(200)]  # 0 .. 19.9
    times_f = [8.0 + i * 0.1 for i in range(120)]  # 8.0 .. 19.9 -> 11.9 s overlap
    platoon = PlatoonRecord(
        tracks=(
            _track("l", times_l, [20.0] * 200),
            _track("f", times_f, [19.0] * 120),
        )
    )
    with pytest.raises(InsufficientOverlap) as err:
        pair_tracks(platoon, 0, 1, "p")
    assert err.value.duration == pytest.approx(11.9)


def test_non_adjacent_pair_rejected():
    n = 200
    times = [i * 0.1 for i in range(n)]
    platoon = PlatoonRecord(
        tracks=(
            _track("a", times, [20.0] * n),
            _track("b", times, [19.0] * n),
            _track("c", times, [18.0] * n),
        )
    )
    with pytest.raises(NonAdjacentPair):
        pair_tracks(platoon, 0, 2, "p")


def test_resample_is_identity_on_grid():
    n = 400
    times = [i * 0.1 for i in range(n)]
    speeds = [20.0 + math.sin(i / 7.0) for i in range(n)]
    track = _track("x", times, speeds)
    grid = pair_grid(track, track, 10.0)
    back = resample_track(track, grid)
    assert np.array_equal(back.times(), track.times())
    assert np.array_equal(back.channel("speed"), track.channel("speed"))
