"""trajkit: uniform car-following schema ETL, cleaning, and calibration."""

__version__ = "0.1.0"

from .calibrate import (
    CalibrationConfig,
    CalibrationResult,
    LinearCfModel,
    RegressionSample,
    build_samples,
    calibrate_vehicle,
    fit_linear_cf,
    predict_accel,
    r_squared,
)
from .clean import (
    CleaningConfig,
    CleaningReport,
    apply_threshold_filters,
    clean_corpus,
    clean_pipeline,
    interpolate_gaps,
    remove_outliers,
    trim_unstable,
)
from .errors import TrajkitError
from .ingest import (
    DatasetProfile,
    PlatoonRecord,
    builtin_profile,
    ingest_file,
    pair_tracks,
)
from .kinematics import (
    complete_trajectory,
    derive_acceleration,
    derive_spacing,
    derive_speed_diff,
    haversine_m,
)
from .model import (
    CfTrajectory,
    GpsFix,
    UniformFrame,
    VehicleTrack,
    VehicleType,
    Violation,
    read_uniform_csv,
    validate_trajectory,
    write_uniform_csv,
)
from .stats import FeatureStats, Histogram, compute_feature_stats, histogram

__all__ = [
    "__version__",
    "CalibrationConfig",
    "CalibrationResult",
    "LinearCfModel",
    "RegressionSample",
    "build_samples",
    "calibrate_vehicle",
    "fit_linear_cf",
    "predict_accel",
    "r_squared",
    "CleaningConfig",
    "CleaningReport",
    "apply_threshold_filters",
    "clean_corpus",
    "clean_pipeline",
    "interpolate_gaps",
    "remove_outliers",
    "trim_unstable",
    "TrajkitError",
    "DatasetProfile",
    "PlatoonRecord",
    "builtin_profile",
    "ingest_file",
    "pair_tracks",
    "complete_trajectory",
    "derive_acceleration",
    "derive_spacing",
    "derive_speed_diff",
    "haversine_m",
    "CfTrajectory",
    "GpsFix",
    "UniformFrame",
    "VehicleTrack",
    "VehicleType",
    "Violation",
    "read_uniform_csv",
    "validate_trajectory",
    "write_uniform_csv",
    "FeatureStats",
    "Histogram",
    "compute_feature_stats",
    "histogram",
]
