"""Least-squares calibration of the linear car-following model.

The model predicts follower acceleration from spacing, own speed, and speed
difference: a_hat = f_s*s + f_v*v + f_dv*dv + z. Inputs may lag the target by
a response delay that must be an integer number of sample periods.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DelayNotMultipleOfPeriod,
    MixedFollowers,
    MixedRates,
    RankDeficient,
    TooFewFrames,
    TooFewSamples,
    ZeroVarianceTarget,
)
from .model import CfTrajectory

MIN_FIT_SAMPLES = 4  # one more than the free coefficients

CALIBRATION_CSV_HEADER = ("vehicle", "r_squared", "f_s", "f_v", "f_dv", "z", "n_samples")


@dataclass(frozen=True)
class LinearCfModel:
    """Coefficients of the linear car-following model plus its input delay."""

    f_s: float
    f_v: float
    f_dv: float
    z: float
    delay_s: float = 0.0


@dataclass(frozen=True)
class RegressionSample:
    """One (inputs, target) pair: state at t, acceleration at t + delay."""

    s: float
    v: float
    dv: float
    a: float


@dataclass(frozen=True)
class CalibrationResult:
    model: LinearCfModel
    r_squared: float
    n_samples: int
    residual_sse: float


def predict_accel(model: LinearCfModel, s: float, v: float, dv: float) -> float:
    """Predicted follower acceleration at one state."""
    return model.f_s * s + model.f_v * v + model.f_dv * dv + model.z


def build_samples(
    traj: CfTrajectory, delay_s: float, rate_hz: float
) -> list[RegressionSample]:
    """Pair inputs at frame i with the acceleration observed at frame i+k.

    k = delay_s * rate_hz must be an integer (within 1e-9); fractional delays
    are rejected rather than interpolated.
    """
    shift = delay_s * rate_hz
    k = round(shift)
    if k < 0 or abs(shift - k) > 1e-9:
        raise DelayNotMultipleOfPeriod(delay_s, rate_hz)
    n = len(traj.frames)
    if n <= k:
        raise TooFewFrames(f"{n} frames cannot support a {k}-sample delay shift")
    frames = traj.frames
    return [
        RegressionSample(
            s=frames[i].spacing,
            v=frames[i].follower_speed,
            dv=frames[i].speed_diff,
            a=frames[i + k].follower_acceleration,
        )
        for i in range(n - k)
    ]


def _design(samples: Sequence[RegressionSample]) -> tuple[np.ndarray, np.ndarray]:
    X = np.empty((len(samples), 4), dtype=float)
    y = np.empty(len(samples), dtype=float)
    for i, smp in enumerate(samples):
        X[i, 0] = smp.s
        X[i, 1] = smp.v
        X[i, 2] = smp.dv
        X[i, 3] = 1.0
        y[i] = smp.a
    return X, y


def fit_linear_cf(
    samples: Sequence[RegressionSample], delay_s: float = 0.0
) -> CalibrationResult:
    """Fit the unique least-squares coefficients for a sample set.

    Rank deficiency (e.g. constant spacing, collinear with the intercept) is
    detected and raised, never silently regularized away.
    """
    if len(samples) < MIN_FIT_SAMPLES:
        raise TooFewSamples(f"need at least {MIN_FIT_SAMPLES} samples, got {len(samples)}")
    X, y = _design(samples)
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("regression samples must be finite")

    coef, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < X.shape[1]:
        raise RankDeficient(f"design matrix rank {rank} < 4; no unique least-squares solution")

    residual = y - X @ coef
    sse = float(residual @ residual)
    sst = float(np.sum((y - y.mean()) ** 2))
    if sst == 0.0:
        raise ZeroVarianceTarget("observed accelerations are constant; R^2 undefined")

    model = LinearCfModel(
        f_s=float(coef[0]), f_v=float(coef[1]), f_dv=float(coef[2]), z=float(coef[3]),
        delay_s=delay_s,
    )
    return CalibrationResult(
        model=model, r_squared=1.0 - sse / sst, n_samples=len(samples), residual_sse=sse
    )


def r_squared(predicted, observed) -> float:
    """Coefficient of determination, 1 - SSE/SST. Negative for bad fits."""
    pred = np.asarray(predicted, dtype=float)
    obs = np.asarray(observed, dtype=float)
    if pred.shape != obs.shape or obs.size < 2:
        raise TooFewSamples("predicted/observed must be equal-length with >= 2 points")
    sst = float(np.sum((obs - obs.mean()) ** 2))
    if sst == 0.0:
        raise ZeroVarianceTarget("observed values are constant; R^2 undefined")
    sse = float(np.sum((obs - pred) ** 2))
    return 1.0 - sse / sst


@dataclass(frozen=True)
class CalibrationConfig:
    """Settings for pooling trajectories into one vehicle calibration."""

    delay_s: float = 0.0


def calibrate_vehicle(
    trajectories: Sequence[CfTrajectory], cfg: CalibrationConfig
) -> CalibrationResult:
    """Pool all trajectories of one follower into a single fit.

    The delay shift is applied per trajectory, never across trajectory
    boundaries, and the pooled samples are concatenated unweighted.
    """
    if not trajectories:
        raise TooFewSamples("no trajectories to calibrate")
    followers = {t.frames[0].follower_id for t in trajectories if t.frames}
    if len(followers) != 1:
        raise MixedFollowers(f"trajectories mix followers: {sorted(followers)}")
    rates = {t.sample_rate_hz for t in trajectories}
    if len(rates) != 1:
        raise MixedRates(f"trajectories mix sample rates: {sorted(rates)}")

    rate = rates.pop()
    samples: list[RegressionSample] = []
    for traj in trajectories:
        samples.extend(build_samples(traj, cfg.delay_s, rate))
    return fit_linear_cf(samples, delay_s=cfg.delay_s)


def write_calibration_csv(
    path: str | Path,
    rows: Iterable[tuple[str, CalibrationResult | None]],
) -> None:
    """One CSV row per vehicle, mirroring the published parameter tables.

    A ``None`` result marks a vehicle whose calibration failed; its numeric
    fields stay empty so downstream consumers can spot the failure.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CALIBRATION_CSV_HEADER)
        for vehicle, result in rows:
            if result is None:
                writer.writerow((vehicle, "", "", "", "", "", ""))
                continue
            writer.writerow(
                (
                    vehicle,
                    f"{result.r_squared:.6f}",
                    f"{result.model.f_s:.6f}",
                    f"{result.model.f_v:.6f}",
                    f"{result.model.f_dv:.6f}",
                    f"{result.model.z:.6f}",
                    result.n_samples,
                )
            )
