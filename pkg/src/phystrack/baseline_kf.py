"""Constant-acceleration Kalman filter tracker used as the comparison baseline.

State is ``[px, py, pz, vx, vy, vz, ax, ay, az]`` with white-noise-jerk
process noise.  Only positions are measured.  Gating uses the squared
Mahalanobis length of the innovation against the chi-square quantile with
three degrees of freedom.  After ``reacquire_after`` consecutive gated-out
detections the filter is re-initialized from them, the way SORT-style
trackers spawn a new track when the old one stops matching.

The acceleration prior is centred on gravity: the baseline is told which way
is down, so it only has to learn what the physics tracker knows outright
about bounces.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Optional

import numpy as np
from scipy.stats import chi2

from . import _kernels
from .core import (
    Detection,
    InitializationError,
    InvalidInputError,
    KinematicState,
    NumericalStateError,
    OrderingError,
    Source,
    TrackedPoint,
    TrackerConfig,
    TrackingError,
    Trajectory,
    Vec3,
    require_finite,
    trajectory_metadata,
)
from .depth import resolve_detection

ACCEL_PRIOR_SIGMA = 3.0  # m/s^2 around gravity


@dataclass(frozen=True)
class KalmanState:
    mean: np.ndarray
    covariance: np.ndarray
    timestamp: float

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=np.float64)
        cov = np.asarray(self.covariance, dtype=np.float64)
        if mean.shape != (9,) or cov.shape != (9, 9):
            raise InvalidInputError("KalmanState needs a 9-vector mean and a 9x9 covariance")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @property
    def position(self) -> Vec3:
        return Vec3.of(self.mean[:3])

    @property
    def velocity(self) -> Vec3:
        return Vec3.of(self.mean[3:6])

    def kinematic(self) -> KinematicState:
        return KinematicState(self.position, self.velocity, self.timestamp)


def check_covariance(cov: np.ndarray) -> None:
    if not np.all(np.isfinite(cov)):
        raise NumericalStateError("covariance has non-finite entries")
    if np.max(np.abs(cov - cov.T)) > 1e-9 * max(1.0, float(np.max(np.abs(cov)))):
        raise NumericalStateError("covariance is not symmetric")
    try:
        np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise NumericalStateError("covariance is not positive definite") from exc


def kf_predict(state: KalmanState, dt: float, process_noise: float) -> KalmanState:
    if not dt > 0:
        raise InvalidInputError(f"dt must be positive, got {dt}")
    check_covariance(state.covariance)
    mean, cov = _kernels.kf_predict(state.mean, state.covariance, float(dt), float(process_noise))
    return KalmanState(mean, cov, state.timestamp + dt)


def kf_update(state: KalmanState, measurement: Vec3, measurement_noise: float) -> KalmanState:
    """Position update in Joseph form; ``measurement_noise`` is a per-axis variance."""
    require_finite("measurement", measurement)
    s = state.covariance[:3, :3] + measurement_noise * np.eye(3)
    if not np.all(np.isfinite(s)) or np.linalg.cond(s) > 1e15:
        raise NumericalStateError("innovation covariance is singular")
    mean, cov = _kernels.kf_update(state.mean, state.covariance, np.asarray(measurement, dtype=np.float64), float(measurement_noise))
    return KalmanState(mean, cov, state.timestamp)


def innovation_distance2(state: KalmanState, measurement: Vec3, measurement_noise: float) -> float:
    _, _, d2 = _kernels.kf_innovation(
        state.mean, state.covariance, np.asarray(measurement, dtype=np.float64), float(measurement_noise)
    )
    return float(d2)


@lru_cache(maxsize=None)
def gate_quantile(probability: float) -> float:
    return float(chi2.ppf(probability, df=3))


def kf_init(position: Vec3, timestamp: float, config: TrackerConfig) -> KalmanState:
    mean = np.zeros(9)
    mean[:3] = position
    mean[6:] = config.gravity
    var = np.concatenate(
        [
            np.full(3, config.measurement_sigma**2),
            np.full(3, config.max_speed**2),
            np.full(3, ACCEL_PRIOR_SIGMA**2),
        ]
    )
    return KalmanState(mean, np.diag(var), timestamp)


def run_kf(detections: Iterable[Optional[Detection]], config: TrackerConfig) -> Trajectory:
    stream = list(detections)
    if not stream:
        raise InvalidInputError("detection stream is empty")
    first = stream[0]
    if first is None:
        raise InitializationError("frame slot 0: the stream must start with a detection")
    z0, _ = resolve_detection(first, None, config.gravity, config.intrinsics, config.pose)
    if z0 is None:
        raise InitializationError(f"frame {first.frame_index}: detection has no usable 3D position")
    r = config.measurement_sigma**2
    q = config.kf_process_noise
    threshold = gate_quantile(config.kf_gate_probability)
    state = kf_init(z0, first.timestamp, config)
    frame = first.frame_index
    points = [TrackedPoint(frame, first.timestamp, state.position, state.velocity, Source.MEASURED)]
    rejected: list[tuple[float, Vec3, bool]] = []
    misses = 0
    stale_since: Optional[int] = None
    for slot, det in enumerate(stream[1:], start=1):
        try:
            if det is None:
                t = state.timestamp + config.frame_interval
                frame += 1
            else:
                t = det.timestamp
                if not t > state.timestamp or det.frame_index <= frame:
                    raise OrderingError(f"detection at frame {det.frame_index} does not follow frame {frame}")
                frame = det.frame_index
            predicted = kf_predict(state, t - state.timestamp, q)
            z, replaced = None, False
            if det is not None:
                z, replaced = resolve_detection(
                    det, state.kinematic(), config.gravity, config.intrinsics, config.pose
                )
            if z is None:
                state = predicted
                misses += 1
                point = TrackedPoint(frame, t, state.position, state.velocity, Source.PREDICTED, state.position)
            elif innovation_distance2(predicted, z, r) > threshold:
                rejected = (rejected + [(t, z, replaced)])[-config.reacquire_after :]
                if len(rejected) >= config.reacquire_after:
                    state = _restart(rejected, config)
                    rejected = []
                    misses = 0
                    source = Source.CORRECTED if replaced else Source.MEASURED
                    point = TrackedPoint(frame, t, state.position, state.velocity, source, predicted.position)
                else:
                    state = predicted
                    misses += 1
                    point = TrackedPoint(frame, t, state.position, state.velocity, Source.CORRECTED, state.position)
            else:
                state = kf_update(predicted, z, r)
                rejected = []
                misses = 0
                source = Source.CORRECTED if replaced else Source.MEASURED
                point = TrackedPoint(frame, t, state.position, state.velocity, source, predicted.position)
        except TrackingError as exc:
            raise type(exc)(f"frame slot {slot}: {exc}") from exc
        if stale_since is None and misses >= config.max_consecutive_predictions:
            stale_since = frame
        points.append(point)
    return Trajectory(tuple(points), trajectory_metadata("kf", points, stale_since))


def _restart(seeds: list[tuple[float, Vec3, bool]], config: TrackerConfig) -> KalmanState:
    t0, z0, _ = seeds[0]
    state = kf_init(z0, t0, config)
    for t, z, _ in seeds[1:]:
        state = kf_update(kf_predict(state, t - state.timestamp, config.kf_process_noise), z, config.measurement_sigma**2)
    return state
