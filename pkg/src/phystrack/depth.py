"""Pixel + depth to 3D, with a kinematic fallback when the depth sample is unusable.

Camera frame: x right, y down, z along the optical axis.  ``CameraPose``
maps camera coordinates into the world frame; the default is the identity,
so without a pose "world" and "camera" coincide.  Depth maps are assumed to
be pixel-aligned with the detection frames.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kinematics
from .core import Detection, InvalidInputError, KinematicState, TrackingError, Vec3

MIN_VALID_DEPTH = 0.1
MAX_VALID_DEPTH = 50.0


class InvalidDepthError(TrackingError, ValueError):
    pass


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self) -> None:
        if not (self.fx > 0 and self.fy > 0):
            raise InvalidInputError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise InvalidInputError("principal point must lie inside the frame")


def _identity() -> tuple[tuple[float, ...], ...]:
    return ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))


@dataclass(frozen=True)
class CameraPose:
    """``world = rotation @ camera + position``."""

    rotation: tuple[tuple[float, ...], ...] = field(default_factory=_identity)
    position: Vec3 = Vec3(0.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        r = np.asarray(self.rotation, dtype=np.float64)
        if r.shape != (3, 3) or not np.allclose(r @ r.T, np.eye(3), atol=1e-9) or np.linalg.det(r) < 0:
            raise InvalidInputError("rotation must be a proper 3x3 rotation matrix")
        object.__setattr__(self, "rotation", tuple(tuple(float(c) for c in row) for row in r))
        object.__setattr__(self, "position", Vec3.of(self.position))

    @property
    def is_identity(self) -> bool:
        return self.rotation == _identity() and self.position == Vec3(0.0, 0.0, 0.0)

    def to_world(self, p_cam: Vec3) -> Vec3:
        if self.is_identity:
            return Vec3.of(p_cam)
        r = np.asarray(self.rotation)
        return Vec3.of(r @ np.asarray(p_cam) + np.asarray(self.position))

    def to_camera(self, p_world: Vec3) -> Vec3:
        if self.is_identity:
            return Vec3.of(p_world)
        r = np.asarray(self.rotation)
        return Vec3.of(r.T @ (np.asarray(p_world) - np.asarray(self.position)))


def is_valid_depth(depth: Optional[float]) -> bool:
    return depth is not None and math.isfinite(depth) and MIN_VALID_DEPTH <= depth <= MAX_VALID_DEPTH


def deproject(u: float, v: float, depth: float, intr: CameraIntrinsics) -> Vec3:
    """Pinhole back-projection into the camera frame."""
    if not (math.isfinite(depth) and depth > 0.0):
        raise InvalidDepthError(f"depth must be finite and positive, got {depth}")
    return Vec3((u - intr.cx) * depth / intr.fx, (v - intr.cy) * depth / intr.fy, depth)


def project(point: Vec3, intr: CameraIntrinsics) -> tuple[float, float]:
    """Camera-frame point to pixel coordinates (inverse of ``deproject``)."""
    x, y, z = point
    if not z > 0.0:
        raise InvalidDepthError(f"point must be in front of the camera, got z={z}")
    return intr.fx * x / z + intr.cx, intr.fy * y / z + intr.cy


def world_to_pixel(
    point: Vec3, intr: CameraIntrinsics, pose: Optional[CameraPose] = None
) -> tuple[tuple[float, float], float]:
    """Pixel centre and camera depth of a world point."""
    cam = point if pose is None else pose.to_camera(point)
    return project(cam, intr), float(cam[2])


def sample_depth(depth_map: np.ndarray, u: float, v: float, median: bool = False) -> float:
    """Depth at the pixel nearest ``(u, v)``.

    With ``median=True`` the median of the finite values in the surrounding
    3x3 window is returned instead (NaN if none are finite).
    """
    rows, cols = depth_map.shape
    col = int(round(u))
    row = int(round(v))
    if not (0 <= row < rows and 0 <= col < cols):
        return math.nan
    if not median:
        return float(depth_map[row, col])
    window = depth_map[max(row - 1, 0) : row + 2, max(col - 1, 0) : col + 2]
    finite = window[np.isfinite(window)]
    return float(np.median(finite)) if finite.size else math.nan


def resolve_position(
    det: Detection,
    prior: Optional[KinematicState],
    gravity: Vec3,
    intr: Optional[CameraIntrinsics],
    pose: Optional[CameraPose] = None,
    max_depth_jump: Optional[float] = None,
) -> Optional[Vec3]:
    """World position for a detection, or ``None`` if it cannot be placed in 3D.

    A usable depth (finite, inside [0.1, 50] m, and within ``max_depth_jump``
    of the prior's predicted depth when both are given) is deprojected
    directly.  Otherwise the prior is flown forward to the detection time and
    its camera depth is used on the pixel ray instead.
    """
    return resolve_detection(det, prior, gravity, intr, pose, max_depth_jump)[0]


def resolve_detection(
    det: Detection,
    prior: Optional[KinematicState],
    gravity: Vec3,
    intr: Optional[CameraIntrinsics],
    pose: Optional[CameraPose] = None,
    max_depth_jump: Optional[float] = None,
) -> tuple[Optional[Vec3], bool]:
    """Like ``resolve_position`` but also reports whether the depth was replaced."""
    if det.world_position is not None:
        return det.world_position, False
    if det.pixel_center is None or intr is None:
        return None, False
    u, v = det.pixel_center
    depth = det.depth
    predicted: Optional[Vec3] = None
    if is_valid_depth(depth) and max_depth_jump is not None and prior is not None:
        predicted = _predicted_camera_point(det, prior, gravity, pose)
        if abs(depth - predicted[2]) > max_depth_jump:
            depth = None
    if is_valid_depth(depth):
        cam = deproject(u, v, depth, intr)
        replaced = False
    elif prior is not None:
        if predicted is None:
            predicted = _predicted_camera_point(det, prior, gravity, pose)
        z = predicted[2]
        if not (math.isfinite(z) and z > 0.0):
            return None, False
        cam = deproject(u, v, z, intr)
        replaced = True
    else:
        return None, False
    return (cam if pose is None else pose.to_world(cam)), replaced


def _predicted_camera_point(det: Detection, prior: KinematicState, gravity: Vec3, pose: Optional[CameraPose]) -> Vec3:
    elapsed = det.timestamp - prior.timestamp
    predicted = kinematics.predict_position(prior, max(elapsed, 0.0), gravity)
    return predicted if pose is None else pose.to_camera(predicted)
