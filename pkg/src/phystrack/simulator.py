"""Deterministic ground truth and seeded detection corruption.

``simulate`` integrates the flight analytically between impacts, so it is an
exact oracle for the kinematics + restitution model.  ``corrupt`` turns the
truth into a detector-like stream: Gaussian noise, i.i.d. and windowed
dropouts, gross outliers, and (with a camera) pixel + depth measurements with
occasional depth holes.

Random draws come from one PCG64 stream seeded by ``ScenarioSpec.seed``.
Every frame consumes the same nine draws in the same order (dropout, noise
x/y/z, outlier, outlier direction x/y/z, depth hole), whether or not they are
used, so changing one probability never reshuffles the other corruptions.
Frame 0 is exempt from i.i.d. dropout, outliers and depth holes because a
track has to start from a detection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .collision import CollisionEvent, step_with_collisions
from .core import (
    RACQUETBALL_COURT,
    CourtGeometry,
    Detection,
    InvalidInputError,
    KinematicState,
    Source,
    TrackedPoint,
    Trajectory,
    TrackingError,
    Vec3,
)
from .depth import CameraIntrinsics, CameraPose, world_to_pixel


class InvalidScenarioError(TrackingError, ValueError):
    pass


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    court: CourtGeometry
    initial: KinematicState
    duration: float
    fps: float = 60.0
    noise_sigma: float = 0.0
    dropout_probability: float = 0.0
    dropout_windows: tuple[tuple[int, int], ...] = ()
    outlier_probability: float = 0.0
    outlier_magnitude: float = 1.0
    invalid_depth_probability: float = 0.0
    seed: int = 0
    intrinsics: Optional[CameraIntrinsics] = None
    pose: Optional[CameraPose] = None
    description: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "dropout_windows", tuple((int(a), int(b)) for a, b in self.dropout_windows))
        if not self.fps > 0:
            raise InvalidScenarioError("fps must be positive")
        if not self.duration > 0:
            raise InvalidScenarioError("duration must be positive")
        for name in ("dropout_probability", "outlier_probability", "invalid_depth_probability"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise InvalidScenarioError(f"{name} must be in [0, 1], got {p}")
        if self.noise_sigma < 0 or self.outlier_magnitude < 0:
            raise InvalidScenarioError("noise_sigma and outlier_magnitude must be non-negative")
        n = self.n_frames
        for start, end in self.dropout_windows:
            if not 1 <= start <= end < n:
                raise InvalidScenarioError(f"dropout window {(start, end)} must lie within [1, {n})")
        if not 0 <= self.seed < 2**64:
            raise InvalidScenarioError("seed must be a 64-bit unsigned integer")

    @property
    def n_frames(self) -> int:
        return int(round(self.duration * self.fps))

    @property
    def frame_interval(self) -> float:
        return 1.0 / self.fps

    def frame_time(self, k: int) -> float:
        return self.initial.timestamp + k / self.fps

    def in_window(self, k: int) -> bool:
        return any(start <= k <= end for start, end in self.dropout_windows)


@dataclass
class CorruptionLog:
    dropped: list[int] = field(default_factory=list)
    window_dropped: list[int] = field(default_factory=list)
    outliers: list[int] = field(default_factory=list)
    depth_holes: list[int] = field(default_factory=list)


def simulate_with_events(spec: ScenarioSpec) -> tuple[Trajectory, list[CollisionEvent]]:
    if not spec.court.contains(spec.initial.position):
        raise InvalidScenarioError(f"initial position {spec.initial.position!r} is outside the court")
    state = spec.initial
    points = [TrackedPoint(0, state.timestamp, state.position, state.velocity, Source.MEASURED)]
    events: list[CollisionEvent] = []
    for k in range(1, spec.n_frames):
        t = spec.frame_time(k)
        state, step_events = step_with_collisions(state, t - state.timestamp, spec.court)
        state = replace(state, timestamp=t)
        events.extend(step_events)
        points.append(TrackedPoint(k, t, state.position, state.velocity, Source.MEASURED))
    meta = {"scenario": spec.name, "kind": "truth", "units": "m", "collisions": str(len(events))}
    return Trajectory(tuple(points), meta), events


def simulate(spec: ScenarioSpec) -> Trajectory:
    return simulate_with_events(spec)[0]


def corrupt(truth: Trajectory, spec: ScenarioSpec) -> list[Optional[Detection]]:
    return corrupt_with_log(truth, spec)[0]


def corrupt_with_log(truth: Trajectory, spec: ScenarioSpec) -> tuple[list[Optional[Detection]], CorruptionLog]:
    if len(truth) != spec.n_frames:
        raise InvalidInputError(f"truth has {len(truth)} frames, scenario expects {spec.n_frames}")
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    log = CorruptionLog()
    stream: list[Optional[Detection]] = []
    for k, point in enumerate(truth.points):
        u_drop = rng.random()
        noise = rng.standard_normal(3)
        u_out = rng.random()
        direction = rng.standard_normal(3)
        u_depth = rng.random()
        if spec.in_window(k):
            log.window_dropped.append(k)
            stream.append(None)
            continue
        if k > 0 and u_drop < spec.dropout_probability:
            log.dropped.append(k)
            stream.append(None)
            continue
        true_pos = np.asarray(point.position)
        if k > 0 and u_out < spec.outlier_probability:
            log.outliers.append(k)
            pos = true_pos + spec.outlier_magnitude * direction / np.linalg.norm(direction)
        else:
            pos = true_pos + spec.noise_sigma * noise
        if spec.intrinsics is None:
            stream.append(Detection(point.frame_index, point.timestamp, world_position=Vec3.of(pos)))
            continue
        pixel, depth = world_to_pixel(Vec3.of(pos), spec.intrinsics, spec.pose)
        if k > 0 and u_depth < spec.invalid_depth_probability:
            log.depth_holes.append(k)
            depth = math.nan
        stream.append(Detection(point.frame_index, point.timestamp, pixel_center=pixel, depth=depth))
    return stream, log


# Camera behind the back wall (z < 0) looking down the court towards the front wall.
# Rotation maps camera (x right, y down, z forward) to world (y up): 180 degrees about z.
BACK_WALL_CAMERA = CameraIntrinsics(fx=1050.0, fy=1050.0, cx=960.0, cy=540.0, width=1920, height=1080)
BACK_WALL_POSE = CameraPose(
    rotation=((-1.0, 0.0, 0.0), (0.0, -1.0, 0.0), (0.0, 0.0, 1.0)),
    position=Vec3(3.048, 2.0, -0.5),
)


def builtin_scenarios() -> list[ScenarioSpec]:
    """Five archetypes: multi-bounce, high-speed wall hit, occlusion, far-to-near sweep, mixed bounces.

    All use 60 fps, 1 cm detection noise and 15 % i.i.d. dropout on a
    regulation racquetball court with restitution 0.95.
    """
    court = RACQUETBALL_COURT
    common = dict(court=court, fps=60.0, noise_sigma=0.01, dropout_probability=0.15)
    return [
        ScenarioSpec(
            name="bounce-multi",
            initial=KinematicState(Vec3(1.0, 1.2, 2.0), Vec3(6.0, -12.0, 14.0), 0.0),
            duration=2.0,
            dropout_windows=((52, 56),),
            description="Hard downward drive: seven floor, wall and side-wall impacts, two of them 49 ms apart.",
            **common,
        ),
        ScenarioSpec(
            name="wall-highspeed",
            initial=KinematicState(Vec3(2.0, 1.0, 3.0), Vec3(4.0, 2.5, 45.0), 0.0),
            duration=1.2,
            dropout_windows=((14, 16),),
            description="45 m/s drive into the front wall, rebounding off the back wall.",
            **common,
        ),
        ScenarioSpec(
            name="occlusion",
            initial=KinematicState(Vec3(1.0, 1.0, 2.0), Vec3(1.5, 4.0, 6.0), 0.0),
            duration=0.9,
            dropout_windows=((20, 34),),
            description="Collision-free lob with a 15-frame occlusion mid-flight.",
            **common,
        ),
        ScenarioSpec(
            name="depth-sweep",
            initial=KinematicState(Vec3(2.0, 1.0, 11.5), Vec3(1.0, 4.5, -12.0), 0.0),
            duration=0.85,
            dropout_windows=((30, 33),),
            invalid_depth_probability=0.05,
            intrinsics=BACK_WALL_CAMERA,
            pose=BACK_WALL_POSE,
            description="Ball travelling from the front wall towards the camera, measured as pixel + depth.",
            **common,
        ),
        ScenarioSpec(
            name="mixed-collision",
            initial=KinematicState(Vec3(1.5, 2.0, 3.0), Vec3(9.0, -3.0, 8.0), 0.0),
            duration=1.5,
            dropout_windows=((40, 43),),
            description="Floor and side-wall impacts interleaved.",
            **common,
        ),
    ]


def scenario_by_name(name: str) -> ScenarioSpec:
    for spec in builtin_scenarios():
        if spec.name == name:
            return spec
    raise KeyError(name)
