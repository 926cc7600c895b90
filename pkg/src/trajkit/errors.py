"""Exception hierarchy shared across the pipeline.

Every error carries a stable ``code`` (the class name) so the CLI can emit
machine-readable error JSON.
"""
from __future__ import annotations


class TrajkitError(Exception):
    """Base class for all trajkit errors."""

    @property
    def code(self) -> str:
        return type(self).__name__


class ConfigError(TrajkitError):
    """Invalid configuration value or document."""


class MissingInput(TrajkitError):
    """An input path named in the configuration does not exist."""


class UnknownProfile(TrajkitError):
    """Requested built-in dataset profile is not one of the known names."""


class MissingColumn(TrajkitError):
    def __init__(self, name: str):
        super().__init__(f"required column not found in header: {name!r}")
        self.name = name


class EmptyFile(TrajkitError):
    """Input file has no data rows."""


class NonMonotoneTime(TrajkitError):
    """Timestamp decreased by more than one sample period."""

    def __init__(self, row: int, message: str = ""):
        super().__init__(message or f"time decreases by more than one sample period at row {row}")
        self.row = row


class NonAdjacentPair(TrajkitError):
    """Leader/follower slots are not adjacent in platoon order."""


class InsufficientOverlap(TrajkitError):
    def __init__(self, duration: float):
        super().__init__(f"common time window of {duration:.3f} s is below the 15 s minimum")
        self.duration = duration


class MisalignedTracks(TrajkitError):
    """Vehicle tracks are not aligned with the trajectory's frame grid."""


class AllInvalid(TrajkitError):
    """Track has fewer than two valid fixes; interpolation is impossible."""


class TooFewSamples(TrajkitError):
    """Not enough samples for the requested computation."""


class TooFewFrames(TrajkitError):
    """Trajectory is shorter than the requested delay shift."""


class DelayNotMultipleOfPeriod(TrajkitError):
    def __init__(self, delay_s: float, rate_hz: float):
        super().__init__(
            f"delay {delay_s} s is not an integer multiple of the sample period at {rate_hz} Hz"
        )
        self.delay_s = delay_s
        self.rate_hz = rate_hz


class RankDeficient(TrajkitError):
    """Design matrix [s, v, dv, 1] is rank deficient; the fit has no unique minimizer."""


class ZeroVarianceTarget(TrajkitError):
    """Observed accelerations are constant; R^2 is undefined."""


class MixedFollowers(TrajkitError):
    """Trajectories pooled for one calibration have different follower ids."""


class MixedRates(TrajkitError):
    """Trajectories pooled for one calibration have different sample rates."""


class SchemaMismatch(TrajkitError):
    """CSV header does not match the uniform schema exactly."""


class EmptyInput(TrajkitError):
    """Operation received an empty value sequence."""
