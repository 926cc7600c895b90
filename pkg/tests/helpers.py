"""Shared builders and independent oracles for the test suite.

Oracles here deliberately avoid the library code paths they check: geodesy
via 3-D chord length, least squares via explicit normal equations, cleaning
counts via staged pure-Python loops over the raw frames.
"""
from __future__ import annotations

import math
import statistics
from dataclasses import replace

import numpy as np

from trajkit.model import CfTrajectory, UniformFrame

EARTH_RADIUS_M = 6_371_000.0


def make_frame(
    traj_id: str = "t0",
    frame_id: int = 0,
    leader_speed: float = 21.0,
    follower_speed: float = 20.0,
    follower_acceleration: float = 0.0,
    spacing: float = 25.0,
    speed_diff: float | None = None,
) -> UniformFrame:
    return UniformFrame(
        traj_id=traj_id,
        frame_id=frame_id,
        leader_id="lead",
        leader_type=0,
        leader_speed=leader_speed,
        follower_id="foll",
        follower_type=1,
        follower_speed=follower_speed,
        follower_acceleration=follower_acceleration,
        spacing=spacing,
        speed_diff=leader_speed - follower_speed if speed_diff is None else speed_diff,
    )


def make_traj(
    n: int = 200,
    traj_id: str = "t0",
    rate_hz: float = 10.0,
    **frame_kwargs,
) -> CfTrajectory:
    frames = tuple(make_frame(traj_id=traj_id, frame_id=i, **frame_kwargs) for i in range(n))
    return CfTrajectory(traj_id=traj_id, sample_rate_hz=rate_hz, frames=frames)


def traj_from_arrays(
    traj_id: str,
    rate_hz: float,
    spacing,
    follower_speed,
    leader_speed,
    accel,
) -> CfTrajectory:
    frames = tuple(
        make_frame(
            traj_id=traj_id,
            frame_id=i,
            leader_speed=float(leader_speed[i]),
            follower_speed=float(follower_speed[i]),
            follower_acceleration=float(accel[i]),
            spacing=float(spacing[i]),
        )
        for i in range(len(spacing))
    )
    return CfTrajectory(traj_id=traj_id, sample_rate_hz=rate_hz, frames=frames)


# ---------------------------------------------------------------- geodesy

def chord_distance_oracle_m(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Great-circle distance through the 3-D chord, not the haversine form."""

    def unit(lat: float, lon: float) -> tuple[float, float, float]:
        phi, lam = math.radians(lat), math.radians(lon)
        return (
            math.cos(phi) * math.cos(lam),
            math.cos(phi) * math.sin(lam),
            math.sin(phi),
        )

    x1, y1, z1 = unit(lat1, lon1)
    x2, y2, z2 = unit(lat2, lon2)
    chord = math.sqrt((x1 - x2) ** 2 + (y1 - y2) ** 2 + (z1 - z2) ** 2)
    return EARTH_RADIUS_M * 2.0 * math.asin(min(1.0, chord / 2.0))


# ----------------------------------------------------------- least squares

def normal_equations_fit(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Brute-force least squares through the explicit normal equations."""
    return np.linalg.solve(X.T @ X, X.T @ y)


def coefficient_standard_errors(X: np.ndarray, sigma: float) -> np.ndarray:
    """Diagonal of (X^T X)^-1 scaled by the known noise variance."""
    return np.sqrt(np.diag(np.linalg.inv(X.T @ X)) * sigma**2)


def design_matrix(samples) -> tuple[np.ndarray, np.ndarray]:
    X = np.array([[smp.s, smp.v, smp.dv, 1.0] for smp in samples])
    y = np.array([smp.a for smp in samples])
    return X, y


# -------------------------------------------------- planted-violation corpus

class PlantedTrajectory:
    """One randomized trajectory with known planted cleaning violations."""

    def __init__(self, traj: CfTrajectory, windows, n_slow: int, n_fast: int, n_outlier: int):
        self.traj = traj
        self.windows = windows
        self.n_slow = n_slow
        self.n_fast = n_fast
        self.n_outlier = n_outlier


def build_planted_trajectory(rng: np.random.Generator, traj_id: str) -> PlantedTrajectory:
    """Bounded-uniform base data plus far-out plants.

    Uniform bases keep every unplanted value strictly inside its 3-sigma band,
    so the staged oracle counts exactly the plants. All plants land inside the
    keep-window and on distinct frames.
    """
    rate = 10.0
    n = int(rng.integers(250, 400))
    spacing = rng.uniform(20.0, 30.0, n)
    follower = rng.uniform(15.0, 20.0, n)
    leader = follower + rng.uniform(-0.4, 0.4, n)
    accel = rng.uniform(-0.4, 0.4, n)

    if rng.random() < 0.5:
        w0 = float(rng.uniform(0.0, 3.0))
        w1 = float(rng.uniform(w0 + 20.0, n / rate))
        windows = [(w0, w1)]
        # Strictly inside the half-open window even on exact boundaries.
        lo = int(math.ceil(w0 * rate))
        hi = min(int(math.ceil((w1 - 1e-9) * rate)) - 1, n - 1)
    else:
        windows = None
        lo, hi = 0, n - 1

    n_slow = int(rng.integers(0, 4))
    n_fast = int(rng.integers(0, 4))
    n_outlier = int(rng.integers(0, 4))
    idx = rng.choice(np.arange(lo, hi + 1), size=n_slow + n_fast + n_outlier, replace=False)
    slow_idx = idx[:n_slow]
    fast_idx = idx[n_slow:n_slow + n_fast]
    outlier_idx = idx[n_slow + n_fast:]

    follower[slow_idx] = rng.uniform(0.0, 0.09, n_slow)
    accel[fast_idx] = rng.choice([-1.0, 1.0], n_fast) * rng.uniform(5.5, 9.0, n_fast)
    # Outlier plants pass the threshold filters but sit far outside any band.
    kinds = rng.integers(0, 2, n_outlier)
    for k, i in zip(kinds, outlier_idx):
        if k == 0:
            spacing[i] = rng.uniform(200.0, 250.0)
        else:
            accel[i] = float(rng.choice([-1.0, 1.0])) * 4.5

    traj = traj_from_arrays(traj_id, rate, spacing, follower, leader, accel)
    return PlantedTrajectory(traj, windows, n_slow, n_fast, n_outlier)


def oracle_stage_counts(planted: PlantedTrajectory, cfg) -> dict[str, int]:
    """Replay trim -> threshold -> outlier semantics with plain Python."""
    traj = planted.traj
    rate = traj.sample_rate_hz

    if planted.windows:
        kept = [
            fr
            for fr in traj.frames
            if any(a - 1e-9 <= fr.frame_id / rate < b - 1e-9 for a, b in planted.windows)
        ]
    else:
        kept = list(traj.frames)
    trimmed = len(traj.frames) - len(kept)

    survivors = []
    threshold_dropped = 0
    for fr in kept:
        slow = fr.leader_speed < cfg.speed_floor or fr.follower_speed < cfg.speed_floor
        fast = abs(fr.follower_acceleration) > cfg.accel_bound
        if slow or fast:
            threshold_dropped += 1
        else:
            survivors.append(fr)

    bands = {}
    for feat in cfg.outlier_features:
        values = [getattr(fr, feat) for fr in survivors]
        mu = statistics.mean(values)
        sd = statistics.stdev(values)
        bands[feat] = (mu - cfg.sigma_k * sd, mu + cfg.sigma_k * sd)

    outliers = 0
    final = []
    for fr in survivors:
        out = any(
            not (lo <= getattr(fr, feat) <= hi) for feat, (lo, hi) in bands.items()
        )
        if out:
            outliers += 1
        else:
            final.append(fr)

    return {
        "trimmed": trimmed,
        "threshold_dropped": threshold_dropped,
        "outliers": outliers,
        "final": len(final),
        "bands": bands,
    }
