"""Free-flight motion under constant gravity."""

from __future__ import annotations

import math
from typing import Optional

from . import _kernels
from .core import DegenerateIntervalError, InvalidInputError, KinematicState, Vec3, require_finite


def predict_position(state: KinematicState, dt: float, gravity: Vec3) -> Vec3:
    """Position after ``dt`` seconds of free flight: ``p0 + v0 dt + g dt^2 / 2``."""
    _check(state, dt, gravity)
    if dt == 0.0:
        return state.position
    half = 0.5 * dt * dt
    return Vec3(*(p + v * dt + g * half for p, v, g in zip(state.position, state.velocity, gravity)))


def predict_state(state: KinematicState, dt: float, gravity: Vec3) -> KinematicState:
    _check(state, dt, gravity)
    if dt == 0.0:
        return state
    velocity = Vec3(*(v + g * dt for v, g in zip(state.velocity, gravity)))
    return KinematicState(predict_position(state, dt, gravity), velocity, state.timestamp + dt)


def estimate_velocity(p_i: Vec3, p_j: Vec3, t_i: float, t_j: float) -> Vec3:
    """Mean velocity between two timed positions (displacement over elapsed time)."""
    if not t_j > t_i:
        raise DegenerateIntervalError(f"need t_j > t_i, got t_i={t_i}, t_j={t_j}")
    span = t_j - t_i
    return Vec3(*((b - a) / span for a, b in zip(p_i, p_j)))


def endpoint_velocity(p_i: Vec3, p_j: Vec3, t_i: float, t_j: float, gravity: Vec3) -> Vec3:
    """Velocity at ``t_j`` of the ballistic arc through both positions.

    Under constant acceleration the mean velocity over an interval is the
    velocity at its midpoint, so the endpoint value adds ``g * span / 2``.
    """
    mean = estimate_velocity(p_i, p_j, t_i, t_j)
    half_span = 0.5 * (t_j - t_i)
    return Vec3(*(m + g * half_span for m, g in zip(mean, gravity)))


def time_of_impact(state: KinematicState, plane_axis: int, plane_value: float, gravity: Vec3) -> Optional[float]:
    """Smallest positive time at which the path crosses ``position[axis] == plane_value``.

    Roots within 1e-9 s of the start are ignored, so a ball sitting on the
    plane is not reported as hitting it again.
    """
    if plane_axis not in (0, 1, 2):
        raise InvalidInputError(f"plane_axis must be 0, 1 or 2, got {plane_axis}")
    require_finite("state", state.position, state.velocity, gravity, plane_value)
    t = _kernels.first_positive_root(
        float(state.position[plane_axis]),
        float(state.velocity[plane_axis]),
        float(gravity[plane_axis]),
        float(plane_value),
    )
    return None if math.isnan(t) else float(t)


def _check(state: KinematicState, dt: float, gravity: Vec3) -> None:
    require_finite("state", state.position, state.velocity, gravity, dt)
    if dt < 0.0:
        raise InvalidInputError(f"dt must be non-negative, got {dt}")
