"""End-to-end pipeline CLI: ingest -> clean -> report.

All configuration lives in one JSON document (plus --out/--profile flag
overrides); identical config and inputs always produce byte-identical output
files. Exit codes: 0 success, 1 partial failure (some vehicle's calibration
failed), 2 invalid input.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Sequence

from . import __version__
from .calibrate import (
    CalibrationConfig,
    CalibrationResult,
    calibrate_vehicle,
    write_calibration_csv,
)
from .clean import (
    CleaningConfig,
    CleaningReport,
    clean_corpus,
    cleaning_config_from_json,
    interpolate_gaps,
    interpolated_count,
)
from .errors import ConfigError, InsufficientOverlap, MissingInput, TrajkitError
from .ingest import (
    DatasetProfile,
    build_pair_trajectory,
    builtin_profile,
    ingest_file,
    pair_grid,
    profile_from_json,
    resample_track,
)
from .kinematics import complete_trajectory
from .model import CfTrajectory, read_uniform_csv, write_uniform_csv
from .stats import (
    FEATURES,
    compute_feature_stats,
    histogram,
    stats_to_json_dict,
    write_histogram_csv,
    write_stats_csv,
)

UNIFORM_CSV_NAME = "uniform.csv"
CLEANED_CSV_NAME = "cleaned.csv"
CLEANING_REPORT_NAME = "cleaning_report.json"
STATS_CSV_NAME = "stats.csv"
STATS_JSON_NAME = "stats.json"
CALIBRATION_CSV_NAME = "calibration.csv"
CALIBRATION_JSON_NAME = "calibration.json"


@dataclass(frozen=True)
class EmitFlags:
    uniform_csv: bool = True
    stats: bool = True
    histograms: bool = True
    calibration: bool = True
    cleaning_report: bool = True


@dataclass(frozen=True)
class RunConfig:
    """One fully-resolved pipeline run."""

    profile: DatasetProfile
    inputs: tuple[str, ...]
    out_dir: Path
    cleaning: CleaningConfig
    delay_s: float = 0.0
    vehicles: tuple[str, ...] | None = None
    emit: EmitFlags = field(default_factory=EmitFlags)
    histogram_bins: int = 40
    config_sha256: str = ""

    def __post_init__(self) -> None:
        if not self.inputs:
            raise ConfigError("config must list at least one input path")


def _config_hash(doc: Mapping[str, Any]) -> str:
    canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def load_config(
    path: str | Path,
    out_override: str | None = None,
    profile_override: str | None = None,
) -> RunConfig:
    """Read the run configuration JSON and apply flag overrides."""
    cfg_path = Path(path)
    if not cfg_path.is_file():
        raise MissingInput(f"config file not found: {cfg_path}")
    try:
        doc = json.loads(cfg_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")

    if profile_override is not None:
        doc["profile"] = profile_override
    out_dir = Path(out_override) if out_override else Path(doc.get("out_dir", "out"))

    raw_profile = doc.get("profile")
    if isinstance(raw_profile, str):
        profile = builtin_profile(raw_profile)
    elif isinstance(raw_profile, dict):
        profile = profile_from_json(raw_profile)
    else:
        raise ConfigError("config needs a 'profile' (built-in name or object)")

    cleaning = cleaning_config_from_json(doc.get("cleaning", {}))
    calib = doc.get("calibration", {})
    vehicles = calib.get("vehicles")
    emit = EmitFlags(**doc.get("emit", {}))

    hash_doc = {k: v for k, v in doc.items() if k != "out_dir"}
    return RunConfig(
        profile=profile,
        inputs=tuple(str(p) for p in doc.get("inputs", [])),
        out_dir=out_dir,
        cleaning=cleaning,
        delay_s=float(calib.get("delay_s", 0.0)),
        vehicles=tuple(vehicles) if vehicles is not None else None,
        emit=emit,
        histogram_bins=int(doc.get("histogram_bins", 40)),
        config_sha256=_config_hash(hash_doc),
    )


def _provenance(cfg: RunConfig, command: str) -> dict[str, Any]:
    return {
        "tool": "trajkit",
        "version": __version__,
        "command": command,
        "inputs": list(cfg.inputs),
        "config_sha256": cfg.config_sha256,
    }


def _write_json(path: Path, doc: Any) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_sidecar(path: Path, cfg: RunConfig, command: str, extra: Mapping[str, Any] | None = None) -> None:
    doc = _provenance(cfg, command)
    if extra:
        doc.update(extra)
    _write_json(Path(str(path) + ".provenance.json"), doc)


def _quantize(traj: CfTrajectory) -> CfTrajectory:
    """Round floats exactly as a uniform-CSV round trip would."""
    frames = tuple(
        replace(
            fr,
            leader_speed=float(f"{fr.leader_speed:.6f}"),
            follower_speed=float(f"{fr.follower_speed:.6f}"),
            follower_acceleration=float(f"{fr.follower_acceleration:.6f}"),
            spacing=float(f"{fr.spacing:.6f}"),
            speed_diff=float(f"{fr.speed_diff:.6f}"),
        )
        for fr in traj.frames
    )
    return replace(traj, frames=frames)


def run_ingest(cfg: RunConfig) -> tuple[list[CfTrajectory], dict[str, Any]]:
    """Parse every input, gap-fill tracks, pair adjacent vehicles, derive.

    Returns completed pre-clean trajectories plus an ingest metadata dict
    (interpolation counts, skipped pairs, per-trajectory provenance).
    """
    rate = cfg.profile.declared_rate_hz
    trajectories: list[CfTrajectory] = []
    meta: dict[str, Any] = {"interpolated_points": 0, "skipped_pairs": [], "trajectories": {}}
    seen_bases: set[str] = set()

    for ordinal, raw_path in enumerate(cfg.inputs):
        path = Path(raw_path)
        if not path.exists():
            raise MissingInput(f"input path not found: {path}")
        base = path.stem if path.is_file() else path.name
        if base in seen_bases:
            base = f"{base}~{ordinal}"
        seen_bases.add(base)

        platoon = ingest_file(path, cfg.profile)
        segmented = []
        for track in platoon.tracks:
            segments = interpolate_gaps(track, cfg.cleaning.max_gap)
            meta["interpolated_points"] += sum(interpolated_count(s) for s in segments)
            segmented.append(segments)

        for i in range(len(segmented) - 1):
            multi = len(segmented[i]) > 1 or len(segmented[i + 1]) > 1
            for si, leader in enumerate(segmented[i]):
                for sj, follower in enumerate(segmented[i + 1]):
                    traj_id = f"{base}#p{i}" + (f".{si}.{sj}" if multi else "")
                    try:
                        grid = pair_grid(leader, follower, rate)
                    except InsufficientOverlap as exc:
                        meta["skipped_pairs"].append(
                            {"traj_id": traj_id, "reason": exc.code, "overlap_s": exc.duration}
                        )
                        continue
                    leader_rs = resample_track(leader, grid)
                    follower_rs = resample_track(follower, grid)
                    raw = build_pair_trajectory(
                        traj_id,
                        leader_rs,
                        follower_rs,
                        rate,
                        provenance={
                            "dataset": cfg.profile.name,
                            "source": str(raw_path),
                            "leader_slot": i,
                            "follower_slot": i + 1,
                            "rate_hz": rate,
                        },
                    )
                    traj = complete_trajectory(raw, leader_rs, follower_rs)
                    trajectories.append(traj)
                    meta["trajectories"][traj.traj_id] = dict(traj.provenance)

    trajectories.sort(key=lambda t: t.traj_id)
    return trajectories, meta


def cmd_ingest(cfg: RunConfig) -> int:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    trajectories, meta = run_ingest(cfg)
    if cfg.emit.uniform_csv:
        out = cfg.out_dir / UNIFORM_CSV_NAME
        write_uniform_csv(out, trajectories)
        _write_sidecar(out, cfg, "ingest", meta)
    return 0


def _load_uniform(cfg: RunConfig, name: str) -> tuple[list[CfTrajectory], dict[str, Any]]:
    path = cfg.out_dir / name
    if not path.is_file():
        raise MissingInput(f"{name} not found in {cfg.out_dir}; run the previous stage first")
    sidecar = Path(str(path) + ".provenance.json")
    meta: dict[str, Any] = {}
    if sidecar.is_file():
        meta = json.loads(sidecar.read_text(encoding="utf-8"))
    trajs = read_uniform_csv(path, cfg.profile.declared_rate_hz)
    return trajs, meta


def run_clean(
    cfg: RunConfig, trajectories: Sequence[CfTrajectory], interpolated_points: int = 0
) -> tuple[list[CfTrajectory], CleaningReport]:
    cleaned, report = clean_corpus(trajectories, cfg.cleaning)
    report.interpolated_points += interpolated_points
    return cleaned, report


def _emit_clean(cfg: RunConfig, cleaned: list[CfTrajectory], report: CleaningReport) -> None:
    out = cfg.out_dir / CLEANED_CSV_NAME
    write_uniform_csv(out, cleaned)
    _write_sidecar(out, cfg, "clean")
    if cfg.emit.cleaning_report:
        doc = report.to_json_dict()
        doc["provenance"] = _provenance(cfg, "clean")
        _write_json(cfg.out_dir / CLEANING_REPORT_NAME, doc)


def cmd_clean(cfg: RunConfig) -> int:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    trajs, meta = _load_uniform(cfg, UNIFORM_CSV_NAME)
    cleaned, report = run_clean(cfg, trajs, int(meta.get("interpolated_points", 0)))
    _emit_clean(cfg, cleaned, report)
    return 0


def run_report(
    cfg: RunConfig, trajectories: Sequence[CfTrajectory]
) -> tuple[list[tuple[str, CalibrationResult | None, str | None]], int]:
    """Calibrate every vehicle group; never abort on one vehicle's failure."""
    by_vehicle: dict[str, list[CfTrajectory]] = {}
    for traj in trajectories:
        if traj.frames:
            by_vehicle.setdefault(traj.frames[0].follower_id, []).append(traj)

    vehicles = sorted(by_vehicle)
    if cfg.vehicles is not None:
        vehicles = [v for v in vehicles if v in set(cfg.vehicles)]

    rows: list[tuple[str, CalibrationResult | None, str | None]] = []
    exit_code = 0
    for vehicle in vehicles:
        try:
            result = calibrate_vehicle(by_vehicle[vehicle], CalibrationConfig(cfg.delay_s))
            rows.append((vehicle, result, None))
        except TrajkitError as exc:
            rows.append((vehicle, None, exc.code))
            exit_code = 1
    return rows, exit_code


def _emit_report(cfg: RunConfig, trajectories: Sequence[CfTrajectory]) -> int:
    frames = [fr for traj in trajectories for fr in traj.frames]

    if cfg.emit.stats and len(frames) >= 2:
        stats = compute_feature_stats(frames)
        out = cfg.out_dir / STATS_CSV_NAME
        write_stats_csv(stats, out)
        _write_sidecar(out, cfg, "report")
        doc = stats_to_json_dict(stats)
        doc["provenance"] = _provenance(cfg, "report")
        _write_json(cfg.out_dir / STATS_JSON_NAME, doc)

    if cfg.emit.histograms and frames:
        for feat in FEATURES:
            values = [getattr(fr, feat) for fr in frames]
            hist = histogram(values, bins=cfg.histogram_bins, feature=feat)
            out = cfg.out_dir / f"hist_{feat}.csv"
            write_histogram_csv(hist, out)
            _write_sidecar(out, cfg, "report")

    exit_code = 0
    if cfg.emit.calibration:
        rows, exit_code = run_report(cfg, trajectories)
        out = cfg.out_dir / CALIBRATION_CSV_NAME
        write_calibration_csv(out, [(v, r) for v, r, _ in rows])
        _write_sidecar(out, cfg, "report")
        doc = {
            "provenance": _provenance(cfg, "report"),
            "vehicles": {
                vehicle: (
                    {
                        "r_squared": result.r_squared,
                        "f_s": result.model.f_s,
                        "f_v": result.model.f_v,
                        "f_dv": result.model.f_dv,
                        "z": result.model.z,
                        "delay_s": result.model.delay_s,
                        "n_samples": result.n_samples,
                        "residual_sse": result.residual_sse,
                    }
                    if result is not None
                    else {"error": error}
                )
                for vehicle, result, error in rows
            },
        }
        _write_json(cfg.out_dir / CALIBRATION_JSON_NAME, doc)
    return exit_code


def cmd_report(cfg: RunConfig) -> int:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    trajs, _ = _load_uniform(cfg, CLEANED_CSV_NAME)
    return _emit_report(cfg, trajs)


def cmd_pipeline(cfg: RunConfig) -> int:
    """Ingest, clean, and report in one run.

    Stages hand off in memory but quantize floats exactly as the uniform CSV
    would, so a pipeline run and a stepwise ingest/clean/report run produce
    identical numbers.
    """
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    trajectories, meta = run_ingest(cfg)
    if cfg.emit.uniform_csv:
        out = cfg.out_dir / UNIFORM_CSV_NAME
        write_uniform_csv(out, trajectories)
        _write_sidecar(out, cfg, "ingest", meta)

    trajectories = [_quantize(t) for t in trajectories]
    cleaned, report = run_clean(cfg, trajectories, int(meta["interpolated_points"]))
    _emit_clean(cfg, cleaned, report)

    cleaned = [_quantize(t) for t in cleaned]
    return _emit_report(cfg, cleaned)


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="trajkit",
        description="Convert ACC/ADAS trajectory datasets into a uniform "
        "car-following schema, clean them, and calibrate a linear model.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("ingest", "parse raw dataset files into the uniform pre-clean CSV"),
        ("clean", "run the cleaning regimen on the uniform CSV"),
        ("report", "emit statistics, histograms, and calibration tables"),
        ("pipeline", "ingest, clean, and report in one run"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to the run configuration JSON")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        p.add_argument("--profile", default=None, help="built-in profile name (overrides config)")

    args = parser.parse_args(argv)
    commands = {
        "ingest": cmd_ingest,
        "clean": cmd_clean,
        "report": cmd_report,
        "pipeline": cmd_pipeline,
    }
    try:
        cfg = load_config(args.config, out_override=args.out, profile_override=args.profile)
        return commands[args.command](cfg)
    except TrajkitError as exc:
        print(json.dumps({"code": exc.code, "message": str(exc)}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
