"""Spacing, acceleration, and speed-difference derivation.

Completes raw paired trajectories into full uniform-schema rows:
spacing from the two GPS positions, follower acceleration as the backward
first difference of speed, and speed_diff as leader minus follower speed.
"""
from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from .errors import MisalignedTracks, TooFewSamples
from .model import CfTrajectory, VehicleTrack, reindex_frames

# Spherical Earth. At car-following spacings the sphere-vs-ellipsoid error is
# far below GPS noise; altitude is ignored even when present.
EARTH_RADIUS_M = 6_371_000.0

# Max |t_leader - t_follower| for two tracks to count as time-aligned.
ALIGNMENT_TOL_S = 1e-6


def haversine_m(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Great-circle distance in meters between two WGS-84 points."""
    phi1 = math.radians(lat1)
    phi2 = math.radians(lat2)
    dphi = math.radians(lat2 - lat1)
    dlam = math.radians(lon2 - lon1)
    a = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2.0) ** 2
    return EARTH_RADIUS_M * 2.0 * math.asin(math.sqrt(a))


def haversine_m_arr(
    lat1: np.ndarray, lon1: np.ndarray, lat2: np.ndarray, lon2: np.ndarray
) -> np.ndarray:
    """Vectorized :func:`haversine_m` over coordinate arrays."""
    phi1, phi2 = np.radians(lat1), np.radians(lat2)
    dphi = np.radians(np.asarray(lat2) - np.asarray(lat1))
    dlam = np.radians(np.asarray(lon2) - np.asarray(lon1))
    a = np.sin(dphi / 2.0) ** 2 + np.cos(phi1) * np.cos(phi2) * np.sin(dlam / 2.0) ** 2
    return EARTH_RADIUS_M * 2.0 * np.arcsin(np.sqrt(a))


def derive_acceleration(speeds, dt: float) -> np.ndarray:
    """Backward first difference of speed: a[i] = (v[i] - v[i-1]) / dt.

    Output has one element fewer than the input; the first sample carries no
    acceleration and is dropped from downstream regression sets.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    v = np.asarray(speeds, dtype=float)
    if v.size < 2:
        raise TooFewSamples("acceleration needs at least 2 speed samples")
    return np.diff(v) / dt


def _check_alignment(traj: CfTrajectory, leader: VehicleTrack, follower: VehicleTrack) -> None:
    n = len(traj.frames)
    if len(leader.fixes) != n or len(follower.fixes) != n:
        raise MisalignedTracks(
            f"track lengths ({len(leader.fixes)}, {len(follower.fixes)}) "
            f"do not match {n} frames"
        )
    if n and np.max(np.abs(leader.times() - follower.times())) > ALIGNMENT_TOL_S:
        raise MisalignedTracks("leader and follower timestamps differ beyond tolerance")


def derive_spacing(
    traj: CfTrajectory, leader_track: VehicleTrack, follower_track: VehicleTrack
) -> CfTrajectory:
    """Fill per-frame spacing from the two GPS positions.

    If the source dataset already supplied spacing (all frames finite), the
    source values are kept verbatim and the coordinate-derived distances are
    summarized in provenance for audit.
    """
    _check_alignment(traj, leader_track, follower_track)
    if not traj.frames:
        return traj

    lat_l, lon_l = leader_track.channel("lat"), leader_track.channel("lon")
    lat_f, lon_f = follower_track.channel("lat"), follower_track.channel("lon")
    have_coords = bool(
        np.all(np.isfinite(lat_l)) and np.all(np.isfinite(lon_l))
        and np.all(np.isfinite(lat_f)) and np.all(np.isfinite(lon_f))
    )
    derived = haversine_m_arr(lat_l, lon_l, lat_f, lon_f) if have_coords else None

    source = traj.feature("spacing")
    if np.all(np.isfinite(source)):
        # Source spacing wins; keep the derived distances as an audit summary.
        provenance = dict(traj.provenance)
        if derived is not None:
            diff = np.abs(derived - source)
            provenance["spacing_audit"] = {
                "n": int(diff.size),
                "mean_abs_diff_m": float(np.mean(diff)),
                "max_abs_diff_m": float(np.max(diff)),
            }
        return replace(traj, provenance=provenance)

    if derived is None:
        raise MisalignedTracks(
            "spacing not provided by the source and coordinates are unavailable"
        )
    frames = tuple(
        replace(fr, spacing=float(derived[i])) for i, fr in enumerate(traj.frames)
    )
    return replace(traj, frames=frames)


def derive_speed_diff(traj: CfTrajectory) -> CfTrajectory:
    """Set speed_diff = leader_speed - follower_speed on every frame."""
    frames = tuple(
        replace(fr, speed_diff=fr.leader_speed - fr.follower_speed) for fr in traj.frames
    )
    return replace(traj, frames=frames)


def complete_trajectory(
    traj: CfTrajectory, leader_track: VehicleTrack, follower_track: VehicleTrack
) -> CfTrajectory:
    """Derive spacing, speed_diff, and follower acceleration for a raw pair.

    Source-provided acceleration (when every frame already has one) is kept
    verbatim. Otherwise acceleration comes from the backward speed difference
    and the first frame, which has none, is dropped and frames re-indexed.
    """
    traj = derive_spacing(traj, leader_track, follower_track)
    traj = derive_speed_diff(traj)

    accel = traj.feature("follower_acceleration")
    if np.all(np.isfinite(accel)):
        return traj

    dt = 1.0 / traj.sample_rate_hz
    a = derive_acceleration(traj.feature("follower_speed"), dt)
    frames = tuple(
        replace(fr, follower_acceleration=float(a[i - 1]))
        for i, fr in enumerate(traj.frames)
        if i >= 1
    )
    return replace(traj, frames=reindex_frames(traj.traj_id, frames))
