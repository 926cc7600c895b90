"""Geodesy and derivation of spacing / acceleration / speed difference."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import chord_distance_oracle_m, make_frame
from trajkit.errors import MisalignedTracks, TooFewSamples
from trajkit.kinematics import (
    complete_trajectory,
    derive_acceleration,
    derive_spacing,
    derive_speed_diff,
    haversine_m,
)
from trajkit.model import CfTrajectory, GpsFix, VehicleTrack, VehicleType, validate_trajectory

lat_st = st.floats(min_value=-89.0, max_value=89.0, allow_nan=False)
lon_st = st.floats(min_value=-180.0, max_value=180.0, allow_nan=False)


def test_identical_points_are_zero_distance():
    assert haversine_m(10.0, 20.0, 10.0, 20.0) == 0.0


def test_one_degree_longitude_at_equator():
    # R * pi / 180 for a 1-degree arc on the equator.
    assert haversine_m(0.0, 0.0, 0.0, 1.0) == pytest.approx(111194.93, abs=0.01)
    assert haversine_m(0.0, 0.0, 0.0, 1.0) == pytest.approx(
        chord_distance_oracle_m(0.0, 0.0, 0.0, 1.0), rel=1e-12
    )


def test_small_angle_case():
    assert haversine_m(0.0, 0.0, 0.001, 0.0) == pytest.approx(111.195, abs=0.001)
    assert haversine_m(0.0, 0.0, 0.001, 0.0) == pytest.approx(
        chord_distance_oracle_m(0.0, 0.0, 0.001, 0.0), rel=1e-9
    )


@settings(max_examples=100, deadline=None)
@given(lat1=lat_st, lon1=lon_st, lat2=lat_st, lon2=lon_st)
def test_haversine_is_symmetric(lat1, lon1, lat2, lon2):
    assert haversine_m(lat1, lon1, lat2, lon2) == pytest.approx(
        haversine_m(lat2, lon2, lat1, lon1), rel=1e-12, abs=1e-9
    )


@settings(max_examples=100, deadline=None)
@given(
    lat1=lat_st, lon1=lon_st, lat2=lat_st, lon2=lon_st, lat3=lat_st, lon3=lon_st
)
def test_haversine_triangle_inequality(lat1, lon1, lat2, lon2, lat3, lon3):
    d12 = haversine_m(lat1, lon1, lat2, lon2)
    d23 = haversine_m(lat2, lon2, lat3, lon3)
    d13 = haversine_m(lat1, lon1, lat3, lon3)
    assert d13 <= d12 + d23 + 1e-6


def test_acceleration_constant_speed_is_zero():
    assert derive_acceleration([10.0, 10.0, 10.0], dt=0.1).tolist() == [0.0, 0.0]


def test_acceleration_backward_difference():
    assert derive_acceleration([10.0, 10.5], dt=0.1).tolist() == pytest.approx([5.0])


def test_acceleration_one_hertz_case():
    got = derive_acceleration([20.0, 19.8, 19.8], dt=1.0)
    assert got.tolist() == pytest.approx([-0.2, 0.0])


def test_acceleration_needs_two_samples():
    with pytest.raises(TooFewSamples):
        derive_acceleration([10.0], dt=0.1)
    with pytest.raises(ValueError):
        derive_acceleration([10.0, 11.0], dt=0.0)


@settings(max_examples=50, deadline=None)
@given(
    speeds=st.lists(
        st.floats(min_value=0.0, max_value=40.0, allow_nan=False), min_size=2, max_size=50
    ),
    rate=st.sampled_from([1.0, 10.0]),
)
def test_reintegrating_acceleration_reconstructs_speed(speeds, rate):
    dt = 1.0 / rate
    a = derive_acceleration(speeds, dt)
    rebuilt = speeds[0] + np.cumsum(a * dt)
    assert np.max(np.abs(rebuilt - np.array(speeds[1:]))) < 1e-9


def _track(vehicle_id, lats, lons, speeds, rate=10.0, spacing=None):
    n = len(speeds)
    fixes = tuple(
        GpsFix(
            t=i / rate,
            lat=lats[i],
            lon=lons[i],
            speed=speeds[i],
            spacing=math.nan if spacing is None else spacing[i],
        )
        for i in range(n)
    )
    return VehicleTrack(
        vehicle_id=vehicle_id,
        vehicle_type=VehicleType.AV,
        sample_rate_hz=rate,
        fixes=fixes,
    )


def _raw_traj(n, rate=10.0, spacing=math.nan):
    frames = tuple(
        make_frame(frame_id=i, spacing=spacing, speed_diff=math.nan,
                   follower_acceleration=math.nan)
        for i in range(n)
    )
    return CfTrajectory(traj_id="t0", sample_rate_hz=rate, frames=frames)


def test_spacing_zero_for_identical_coordinates():
    n = 160
    leader = _track("l", [0.0] * n, [0.0] * n, [20.0] * n)
    follower = _track("f", [0.0] * n, [0.0] * n, [20.0] * n)
    out = derive_spacing(_raw_traj(n), leader, follower)
    assert all(fr.spacing == 0.0 for fr in out.frames)


def test_spacing_from_meridian_offset():
    n = 160
    leader = _track("l", [0.0003] * n, [0.0] * n, [20.0] * n)
    follower = _track("f", [0.0] * n, [0.0] * n, [20.0] * n)
    out = derive_spacing(_raw_traj(n), leader, follower)
    assert out.frames[0].spacing == pytest.approx(33.358, abs=1e-3)
    assert out.frames[0].spacing == pytest.approx(
        chord_distance_oracle_m(0.0003, 0.0, 0.0, 0.0), rel=1e-9
    )


def test_source_spacing_wins_and_derived_goes_to_audit():
    n = 160
    leader = _track("l", [0.0003] * n, [0.0] * n, [20.0] * n)
    follower = _track("f", [0.0] * n, [0.0] * n, [20.0] * n)
    out = derive_spacing(_raw_traj(n, spacing=30.0), leader, follower)
    assert all(fr.spacing == 30.0 for fr in out.frames)
    audit = out.provenance["spacing_audit"]
    assert audit["n"] == n
    assert audit["max_abs_diff_m"] == pytest.approx(33.358 - 30.0, abs=1e-3)


def test_derive_spacing_rejects_misaligned_tracks():
    leader = _track("l", [0.0] * 160, [0.0] * 160, [20.0] * 160)
    follower = _track("f", [0.0] * 150, [0.0] * 150, [20.0] * 150)
    with pytest.raises(MisalignedTracks):
        derive_spacing(_raw_traj(160), leader, follower)


@pytest.mark.parametrize(
    "leader,follower,expected", [(25.0, 24.0, 1.0), (24.0, 25.0, -1.0), (20.0, 20.0, 0.0)]
)
def test_speed_diff_sign_convention(leader, follower, expected):
    traj = CfTrajectory(
        traj_id="t0",
        sample_rate_hz=10.0,
        frames=tuple(
            make_frame(frame_id=i, leader_speed=leader, follower_speed=follower,
                       speed_diff=math.nan)
            for i in range(160)
        ),
    )
    out = derive_speed_diff(traj)
    assert all(fr.speed_diff == expected for fr in out.frames)


def test_complete_trajectory_yields_valid_frames():
    n = 200
    rate = 10.0
    lat_f = [i * 20.0 / rate / 111194.9266 for i in range(n)]
    lat_l = [x + 0.0003 for x in lat_f]
    leader = _track("l", lat_l, [0.0] * n, [20.0] * n, rate)
    follower = _track("f", lat_f, [0.0] * n, [20.0 + 0.01 * i for i in range(n)], rate)
    raw = CfTrajectory(
        traj_id="t0",
        sample_rate_hz=rate,
        frames=tuple(
            make_frame(frame_id=i, leader_speed=20.0, follower_speed=20.0 + 0.01 * i,
                       spacing=math.nan, speed_diff=math.nan,
                       follower_acceleration=math.nan)
            for i in range(n)
        ),
    )
    done = complete_trajectory(raw, leader, follower)
    # Acceleration was derived, so the first frame dropped and ids reindexed.
    assert len(done.frames) == n - 1
    assert done.frames[0].frame_id == 0
    assert validate_trajectory(done) == []
    assert all(fr.follower_acceleration == pytest.approx(0.1) for fr in done.frames)
