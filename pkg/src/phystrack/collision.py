"""Restitution bounces off the faces of an axis-aligned court."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .core import (
    CourtGeometry,
    InvalidInputError,
    InvalidStateError,
    KinematicState,
    PathologicalGeometryError,
    Vec3,
    require_finite,
)

MAX_IMPACTS_PER_STEP = 16


@dataclass(frozen=True)
class CollisionEvent:
    """A boundary impact.

    ``surface_normal`` points into the court.  ``impact_fraction`` is the
    position of the impact inside the step that produced it, and ``time`` is
    the absolute impact time when known.
    """

    surface_axis: int
    surface_normal: Vec3
    impact_fraction: float
    impact_point: Vec3
    time: Optional[float] = None


def face_normal(axis: int, side: int) -> Vec3:
    """Inward unit normal of the ``lo`` (side 0) or ``hi`` (side 1) face on ``axis``."""
    n = [0.0, 0.0, 0.0]
    n[axis] = 1.0 if side == 0 else -1.0
    return Vec3(*n)


def reflect_velocity(v: Vec3, normal: Vec3, e_r: float) -> Vec3:
    """Flip and scale the normal component of ``v``; tangential components pass through untouched."""
    require_finite("velocity", v, normal)
    if abs(math.fsum(c * c for c in normal) - 1.0) > 1e-12:
        raise InvalidInputError(f"normal must have unit length, got {normal!r}")
    if not 0.0 < e_r <= 1.0:
        raise InvalidInputError(f"restitution must be in (0, 1], got {e_r}")
    axis = _axis_of(normal)
    if axis is not None:
        # Axis-aligned faces: touch only the normal coordinate so the others stay bit-identical.
        out = list(v)
        out[axis] = -e_r * v[axis]
        return Vec3(*out)
    vn = sum(a * b for a, b in zip(v, normal))
    scale = (1.0 + e_r) * vn
    return Vec3(*(a - scale * b for a, b in zip(v, normal)))


def _axis_of(normal: Vec3) -> Optional[int]:
    nonzero = [k for k, c in enumerate(normal) if c != 0.0]
    return nonzero[0] if len(nonzero) == 1 else None


def detect_collision(p_prev: Vec3, p_next: Vec3, court: CourtGeometry) -> Optional[CollisionEvent]:
    """First face crossed by the straight segment ``p_prev -> p_next``.

    Ties go to the lowest axis index.
    """
    require_finite("segment", p_prev, p_next)
    if not court.strictly_contains(p_prev):
        raise InvalidStateError(f"segment start {p_prev!r} is not strictly inside the court")
    best: Optional[tuple[float, int, int]] = None
    for axis in range(3):
        a, b = p_prev[axis], p_next[axis]
        lo, hi = court.min_corner[axis], court.max_corner[axis]
        if b < lo:
            hit = ((lo - a) / (b - a), axis, 0)
        elif b > hi:
            hit = ((hi - a) / (b - a), axis, 1)
        else:
            continue
        if best is None or hit[0] < best[0]:
            best = hit
    if best is None:
        return None
    fraction, axis, side = best
    point = Vec3(*(a + fraction * (b - a) for a, b in zip(p_prev, p_next)))
    return CollisionEvent(axis, face_normal(axis, side), fraction, point)


@dataclass(frozen=True)
class FlightResult:
    position: np.ndarray
    velocity: np.ndarray
    jacobian: np.ndarray
    events: list[CollisionEvent]


def fly(
    position: np.ndarray,
    velocity: np.ndarray,
    dt: float,
    court: CourtGeometry,
    gravity: np.ndarray,
    restitution: float,
    start_time: float = 0.0,
) -> FlightResult:
    """Array-level flight with bounces; tolerant of a start slightly outside the court.

    A start outside a face while moving outward is bounced immediately.  This
    is what the trackers need, since a noisy estimate near a wall can sit a
    few millimetres beyond it.
    """
    p, v, jac, n, ev_axis, ev_side, ev_time, ev_point = _kernels.propagate(
        np.asarray(position, dtype=np.float64),
        np.asarray(velocity, dtype=np.float64),
        float(dt),
        np.asarray(gravity, dtype=np.float64),
        np.asarray(court.min_corner, dtype=np.float64),
        np.asarray(court.max_corner, dtype=np.float64),
        float(restitution),
        MAX_IMPACTS_PER_STEP,
    )
    if n < 0:
        raise PathologicalGeometryError(f"more than {MAX_IMPACTS_PER_STEP} impacts within one {dt} s step")
    events = [
        CollisionEvent(
            surface_axis=int(ev_axis[i]),
            surface_normal=face_normal(int(ev_axis[i]), int(ev_side[i])),
            impact_fraction=float(ev_time[i] / dt) if dt > 0 else 0.0,
            impact_point=Vec3.of(ev_point[i]),
            time=start_time + float(ev_time[i]),
        )
        for i in range(n)
    ]
    return FlightResult(p, v, jac, events)


def step_with_collisions(
    state: KinematicState,
    dt: float,
    court: CourtGeometry,
    gravity: Optional[Vec3] = None,
    restitution: Optional[float] = None,
) -> tuple[KinematicState, list[CollisionEvent]]:
    """Advance ``state`` by ``dt``, splitting the step at every impact.

    Gravity and restitution default to the court's own values.
    """
    require_finite("state", state.position, state.velocity, dt)
    if not dt > 0.0:
        raise InvalidInputError(f"dt must be positive, got {dt}")
    if not court.contains(state.position, tol=_kernels.PLANE_TOL):
        raise InvalidStateError(f"state {state.position!r} is outside the court")
    g = court.gravity if gravity is None else gravity
    e_r = court.restitution if restitution is None else restitution
    result = fly(state.position.array(), state.velocity.array(), dt, court, np.asarray(g, dtype=np.float64), e_r, state.timestamp)
    new_state = KinematicState(Vec3.of(result.position), Vec3.of(result.velocity), state.timestamp + dt)
    return new_state, result.events
