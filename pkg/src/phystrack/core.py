"""Domain types shared by every module.

World frame convention: right-handed, y up, metres and seconds throughout.
Gravity defaults to ``(0, -9.81, 0)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, NamedTuple, Optional, Sequence

import numpy as np

if TYPE_CHECKING:
    from .depth import CameraIntrinsics, CameraPose


class TrackingError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(TrackingError, ValueError):
    pass


class DegenerateIntervalError(TrackingError, ValueError):
    pass


class InvalidStateError(TrackingError, ValueError):
    pass


class PathologicalGeometryError(TrackingError, RuntimeError):
    pass


class InitializationError(TrackingError):
    pass


class OrderingError(TrackingError, ValueError):
    pass


class NumericalStateError(TrackingError, ArithmeticError):
    pass


class Vec3(NamedTuple):
    """3D vector in metres (or m/s, m/s^2 depending on use)."""

    x: float
    y: float
    z: float

    @classmethod
    def of(cls, values: Iterable[float]) -> "Vec3":
        items = [float(v) for v in values]
        if len(items) != 3:
            raise InvalidInputError(f"Vec3 needs exactly 3 components, got {len(items)}")
        return cls(*items)

    def array(self) -> np.ndarray:
        return np.array(self, dtype=np.float64)

    def is_finite(self) -> bool:
        return all(math.isfinite(c) for c in self)


ZERO = Vec3(0.0, 0.0, 0.0)
DEFAULT_GRAVITY = Vec3(0.0, -9.81, 0.0)


def require_finite(name: str, *values: Sequence[float] | float) -> None:
    for value in values:
        items = value if isinstance(value, (tuple, list, np.ndarray)) else (value,)
        if not all(math.isfinite(float(v)) for v in items):
            raise InvalidInputError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class KinematicState:
    position: Vec3
    velocity: Vec3
    timestamp: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "position", Vec3.of(self.position))
        object.__setattr__(self, "velocity", Vec3.of(self.velocity))
        object.__setattr__(self, "timestamp", float(self.timestamp))
        require_finite("kinematic state", self.position, self.velocity, self.timestamp)

    def is_finite(self) -> bool:
        return self.position.is_finite() and self.velocity.is_finite() and math.isfinite(self.timestamp)


@dataclass(frozen=True)
class Detection:
    """One frame's measurement.

    ``depth`` may be NaN or inf: that is how a stereo camera reports a hole in
    its depth map, and the depth module falls back to kinematics for it.
    """

    frame_index: int
    timestamp: float
    pixel_center: Optional[tuple[float, float]] = None
    depth: Optional[float] = None
    world_position: Optional[Vec3] = None
    confidence: float = 1.0

    def __post_init__(self) -> None:
        if self.frame_index < 0:
            raise InvalidInputError(f"frame_index must be non-negative, got {self.frame_index}")
        if self.world_position is not None:
            object.__setattr__(self, "world_position", Vec3.of(self.world_position))
        if self.pixel_center is not None:
            u, v = self.pixel_center
            object.__setattr__(self, "pixel_center", (float(u), float(v)))
        if self.world_position is None and self.pixel_center is None:
            raise InvalidInputError("detection needs a world position or a pixel centre")
        if not 0.0 <= self.confidence <= 1.0:
            raise InvalidInputError(f"confidence must be in [0, 1], got {self.confidence}")


class Source(str, enum.Enum):
    MEASURED = "measured"
    PREDICTED = "predicted"
    CORRECTED = "corrected"


@dataclass(frozen=True)
class TrackedPoint:
    """One emitted trajectory sample.

    ``prediction`` and ``gate`` record what the tracker expected at this frame
    and the gate radius it applied; they are diagnostics for gate audits and
    are ``None`` for ground-truth trajectories.
    """

    frame_index: int
    timestamp: float
    position: Vec3
    velocity: Vec3
    source: Source = Source.MEASURED
    prediction: Optional[Vec3] = None
    gate: Optional[float] = None


@dataclass(frozen=True)
class Trajectory:
    points: tuple[TrackedPoint, ...] = ()
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "points", tuple(self.points))

    def __len__(self) -> int:
        return len(self.points)

    def positions(self) -> np.ndarray:
        return np.array([p.position for p in self.points], dtype=np.float64).reshape(-1, 3)

    def velocities(self) -> np.ndarray:
        return np.array([p.velocity for p in self.points], dtype=np.float64).reshape(-1, 3)

    def timestamps(self) -> np.ndarray:
        return np.array([p.timestamp for p in self.points], dtype=np.float64)

    def frame_indices(self) -> np.ndarray:
        return np.array([p.frame_index for p in self.points], dtype=np.int64)


def trajectory_metadata(kind: str, points: list[TrackedPoint], stale_since: Optional[int]) -> dict[str, str]:
    """Summary strings stored with a tracker output."""
    counts = {s: 0 for s in Source}
    for p in points:
        counts[p.source] += 1
    meta = {
        "tracker": kind,
        "units": "m",
        "measured": str(counts[Source.MEASURED]),
        "predicted": str(counts[Source.PREDICTED]),
        "corrected": str(counts[Source.CORRECTED]),
        "stale": "true" if stale_since is not None else "false",
    }
    if stale_since is not None:
        meta["stale_since_frame"] = str(stale_since)
    return meta


@dataclass(frozen=True)
class CourtGeometry:
    """Axis-aligned play volume with one restitution coefficient for every face."""

    min_corner: Vec3
    max_corner: Vec3
    gravity: Vec3 = DEFAULT_GRAVITY
    restitution: float = 0.95

    def __post_init__(self) -> None:
        for name in ("min_corner", "max_corner", "gravity"):
            object.__setattr__(self, name, Vec3.of(getattr(self, name)))
        require_finite("court", self.min_corner, self.max_corner, self.gravity)
        if not all(lo < hi for lo, hi in zip(self.min_corner, self.max_corner)):
            raise InvalidInputError("min_corner must be below max_corner on every axis")
        if not 0.0 < self.restitution <= 1.0:
            raise InvalidInputError(f"restitution must be in (0, 1], got {self.restitution}")

    def contains(self, point: Sequence[float], tol: float = 0.0) -> bool:
        return all(lo - tol <= c <= hi + tol for c, lo, hi in zip(point, self.min_corner, self.max_corner))

    def strictly_contains(self, point: Sequence[float]) -> bool:
        return all(lo < c < hi for c, lo, hi in zip(point, self.min_corner, self.max_corner))


# Regulation racquetball court: 20 ft wide, 20 ft high, 40 ft long.
RACQUETBALL_COURT = CourtGeometry(Vec3(0.0, 0.0, 0.0), Vec3(6.096, 6.096, 12.192))

MAX_BALL_SPEED = 80.0  # m/s, about 180 mph


@dataclass(frozen=True)
class TrackerConfig:
    """Parameters for both trackers.

    ``gate_threshold`` is the fixed association gate once a track has a
    velocity.  Before that, a detection is accepted if the ball could have
    reached it at ``max_speed`` with a 3x margin.
    """

    court: CourtGeometry = RACQUETBALL_COURT
    gravity: Optional[Vec3] = None
    restitution: Optional[float] = None
    frame_interval: float = 1.0 / 60.0
    gate_threshold: float = 0.5
    max_speed: float = MAX_BALL_SPEED
    measurement_sigma: float = 0.01
    accel_noise: float = 0.1
    update: str = "fit"
    reacquire_after: int = 3
    max_consecutive_predictions: int = 30
    kf_process_noise: float = 50.0
    kf_gate_probability: float = 0.99
    intrinsics: Optional["CameraIntrinsics"] = None
    pose: Optional["CameraPose"] = None

    def __post_init__(self) -> None:
        if self.gravity is None:
            object.__setattr__(self, "gravity", self.court.gravity)
        else:
            object.__setattr__(self, "gravity", Vec3.of(self.gravity))
        if self.restitution is None:
            object.__setattr__(self, "restitution", self.court.restitution)
        if not self.gate_threshold > 0.0:
            raise InvalidInputError("gate_threshold must be positive")
        if not self.frame_interval > 0.0:
            raise InvalidInputError("frame_interval must be positive")
        if not 0.0 < self.restitution <= 1.0:
            raise InvalidInputError("restitution must be in (0, 1]")
        if self.update not in ("fit", "finite-difference"):
            raise InvalidInputError(f"unknown update mode {self.update!r}")
        if self.measurement_sigma <= 0.0:
            raise InvalidInputError("measurement_sigma must be positive")
        if self.reacquire_after < 2:
            raise InvalidInputError("reacquire_after must be at least 2")

    def acquisition_gate(self, elapsed: float) -> float:
        return max(self.gate_threshold, 3.0 * self.max_speed * elapsed)


@dataclass(frozen=True)
class Violation:
    index: int
    frame_index: int
    message: str


def validate(trajectory: Trajectory) -> list[Violation]:
    """Check the trajectory invariants; an empty list means valid."""
    violations: list[Violation] = []
    prev: Optional[TrackedPoint] = None
    for i, point in enumerate(trajectory.points):
        if not (Vec3.of(point.position).is_finite() and Vec3.of(point.velocity).is_finite()):
            violations.append(Violation(i, point.frame_index, "non-finite position or velocity"))
        if not math.isfinite(point.timestamp):
            violations.append(Violation(i, point.frame_index, "non-finite timestamp"))
        if prev is not None:
            if not point.timestamp > prev.timestamp:
                violations.append(Violation(i, point.frame_index, "non-increasing timestamp"))
            if not point.frame_index > prev.frame_index:
                violations.append(Violation(i, point.frame_index, "non-increasing frame index"))
        prev = point
    return violations
