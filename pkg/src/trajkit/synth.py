"""Deterministic synthetic platoon data for demos and end-to-end tests.

Followers run the linear car-following controller around its equilibrium, so
the generated corpus is well-behaved and a calibration run should recover
coefficients close to the simulation's.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .kinematics import EARTH_RADIUS_M

METERS_PER_DEG_LAT = EARTH_RADIUS_M * math.pi / 180.0

# Stable controller (trace f_v - f_dv < 0, det f_s > 0).
DEFAULT_PARAMS = (0.0165, -0.0067, 0.1532, -0.3921)


@dataclass(frozen=True)
class PlatoonSim:
    """Simulated platoon state: arrays indexed [vehicle][frame]."""

    t: np.ndarray
    speed: np.ndarray
    position_m: np.ndarray
    lat: np.ndarray
    lon: np.ndarray


def simulate_platoon(
    n_vehicles: int = 3,
    duration_s: float = 120.0,
    rate_hz: float = 10.0,
    seed: int = 0,
    params: tuple[float, float, float, float] = DEFAULT_PARAMS,
    base_speed: float = 20.0,
    speed_amplitude: float = 3.0,
    speed_period_s: float = 60.0,
    noise: float = 0.0,
    start_lat: float = 40.0,
    start_lon: float = -83.0,
) -> PlatoonSim:
    """Drive a platoon north along a meridian with a sinusoidal lead profile."""
    rng = np.random.default_rng(seed)
    f_s, f_v, f_dv, z = params
    n = int(round(duration_s * rate_hz))
    dt = 1.0 / rate_hz
    t = np.arange(n) * dt

    speed = np.zeros((n_vehicles, n))
    pos = np.zeros((n_vehicles, n))
    speed[0] = base_speed + speed_amplitude * np.sin(2.0 * math.pi * t / speed_period_s)

    # Start followers at the controller's equilibrium spacing for base_speed.
    eq_spacing = -(f_v * base_speed + z) / f_s
    for i in range(n_vehicles):
        pos[i, 0] = -i * eq_spacing
        if i > 0:
            speed[i, 0] = base_speed

    for k in range(1, n):
        pos[0, k] = pos[0, k - 1] + speed[0, k - 1] * dt
        for i in range(1, n_vehicles):
            s = pos[i - 1, k - 1] - pos[i, k - 1]
            dv = speed[i - 1, k - 1] - speed[i, k - 1]
            a = f_s * s + f_v * speed[i, k - 1] + f_dv * dv + z
            if noise:
                a += noise * rng.standard_normal()
            speed[i, k] = max(speed[i, k - 1] + a * dt, 0.0)
            pos[i, k] = pos[i, k - 1] + speed[i, k - 1] * dt

    lat = start_lat + pos / METERS_PER_DEG_LAT
    lon = np.full_like(lat, start_lon)
    return PlatoonSim(t=t, speed=speed, position_m=pos, lat=lat, lon=lon)


def write_wide_platoon_csv(
    path: str | Path,
    sim: PlatoonSim,
    include_spacing: bool = False,
    missing_cells: int = 0,
    seed: int = 0,
) -> None:
    """Write a platoon as a wide multi-vehicle CSV matching the openacc profile.

    ``missing_cells`` blanks that many randomly chosen speed/lat cells (never
    in the first or last two rows) to exercise gap interpolation.
    """
    n_vehicles, n = sim.speed.shape
    header = ["Time"]
    for i in range(1, n_vehicles + 1):
        header += [f"Speed{i}", f"Lat{i}", f"Lon{i}"]
    if include_spacing:
        header += [f"IVS{i}" for i in range(1, n_vehicles)]

    rows: list[list[str]] = []
    for k in range(n):
        row = [f"{sim.t[k]:.2f}"]
        for i in range(n_vehicles):
            row += [
                f"{sim.speed[i, k]:.6f}",
                f"{sim.lat[i, k]:.8f}",
                f"{sim.lon[i, k]:.8f}",
            ]
        if include_spacing:
            row += [
                f"{sim.position_m[i - 1, k] - sim.position_m[i, k]:.6f}"
                for i in range(1, n_vehicles)
            ]
        rows.append(row)

    if missing_cells:
        rng = np.random.default_rng(seed)
        # Columns 1.. hold per-vehicle speed/lat/lon triplets.
        blankable = list(range(1, 1 + 3 * n_vehicles))
        for _ in range(missing_cells):
            r = int(rng.integers(2, n - 2))
            c = int(rng.choice(blankable))
            rows[r][c] = ""

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def write_per_vehicle_csvs(
    out_dir: str | Path,
    sim: PlatoonSim,
    names: list[str] | None = None,
) -> list[Path]:
    """Write one CSV per vehicle matching the cats profile columns."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n_vehicles, n = sim.speed.shape
    names = names or [f"vehicle{i}" for i in range(n_vehicles)]
    paths = []
    for i in range(n_vehicles):
        path = out / f"{names[i]}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(("time", "latitude", "longitude", "speed"))
            for k in range(n):
                writer.writerow(
                    (
                        f"{sim.t[k]:.2f}",
                        f"{sim.lat[i, k]:.8f}",
                        f"{sim.lon[i, k]:.8f}",
                        f"{sim.speed[i, k]:.6f}",
                    )
                )
        paths.append(path)
    return paths
