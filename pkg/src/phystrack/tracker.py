"""Physics-guided single-ball tracker.

Each frame the current belief is flown forward with gravity and restitution
bounces, the detection is gated against that prediction by Euclidean
distance, and the belief is refined.  Missing or rejected detections are
replaced by the prediction.

The belief is a per-axis (position, velocity) estimate.  Two accepted
positions fix the velocity through the ballistic two-point formula; later
detections refine it with a position-only Kalman update.  A small
white-noise-acceleration term keeps the fit's memory finite, so it behaves
like a fading-memory least-squares fit of the flight arc.  Bounce timing uncertainty is carried through the covariance
with the impact saltation matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from . import _kernels
from .collision import fly
from .core import (
    Detection,
    InitializationError,
    InvalidInputError,
    KinematicState,
    OrderingError,
    Source,
    TrackedPoint,
    TrackerConfig,
    TrackingError,
    Trajectory,
    Vec3,
    trajectory_metadata,
)
from .depth import resolve_detection
from .kinematics import endpoint_velocity

# Slots searched for a consistent detection triple when a track starts.
INITIATION_WINDOW = 8


@dataclass(frozen=True)
class _Seed:
    frame_index: int
    timestamp: float
    position: Vec3
    replaced_depth: bool


@dataclass(frozen=True)
class TrackerState:
    """Immutable tracker state; ``step`` returns a new one.

    ``covariance`` is ``None`` while the track has a single anchor position
    and therefore no velocity estimate.  ``partner_frame``, when set, is the
    only frame whose detection may complete the acquisition (see ``initiate``).
    """

    belief: KinematicState
    last_measured: Optional[KinematicState]
    consecutive_predictions: int
    config: TrackerConfig
    frame_index: int
    covariance: Optional[np.ndarray] = None
    rejected: tuple[_Seed, ...] = ()
    partner_frame: Optional[int] = None

    @property
    def acquiring(self) -> bool:
        return self.covariance is None


def init(config: TrackerConfig, first: Detection) -> TrackerState:
    position, _ = _resolve(config, first, prior=None, max_jump=None)
    if position is None:
        raise InitializationError(
            f"frame {first.frame_index}: detection has no usable 3D position (invalid depth and no prior state)"
        )
    belief = KinematicState(position, Vec3(0.0, 0.0, 0.0), first.timestamp)
    return TrackerState(belief, belief, 0, config, first.frame_index)


def initial_point(state: TrackerState) -> TrackedPoint:
    b = state.belief
    return TrackedPoint(state.frame_index, b.timestamp, b.position, b.velocity, Source.MEASURED)


def step(state: TrackerState, detection: Optional[Detection]) -> tuple[TrackerState, TrackedPoint]:
    cfg = state.config
    belief = state.belief
    if detection is None:
        t = belief.timestamp + cfg.frame_interval
        frame = state.frame_index + 1
    else:
        t = detection.timestamp
        frame = detection.frame_index
        if not t > belief.timestamp or frame <= state.frame_index:
            raise OrderingError(
                f"detection at frame {frame}, t={t} does not follow frame {state.frame_index}, t={belief.timestamp}"
            )
    dt = t - belief.timestamp
    flight = fly(
        belief.position.array(), belief.velocity.array(), dt, cfg.court, np.asarray(cfg.gravity), cfg.restitution
    )
    pred_pos = flight.position
    pred_vel = flight.velocity
    pred_cov = None
    if not state.acquiring:
        pred_cov = _kernels.ballistic_predict_cov(state.covariance, flight.jacobian, dt, cfg.accel_noise)
    if state.acquiring:
        gate = cfg.acquisition_gate(t - state.last_measured.timestamp)
    else:
        gate = cfg.gate_threshold
    prediction = Vec3.of(pred_pos)

    z, replaced = (None, False)
    if detection is not None:
        # With no velocity yet, the kinematic depth fallback would just repeat the anchor depth.
        prior = None if state.acquiring else belief
        z, replaced = _resolve(cfg, detection, prior=prior, max_jump=None if state.acquiring else gate)

    coasting = replace(
        state,
        belief=KinematicState(prediction, Vec3.of(pred_vel), t),
        covariance=pred_cov,
        frame_index=frame,
        consecutive_predictions=state.consecutive_predictions + 1,
    )

    if z is None:
        point = TrackedPoint(frame, t, prediction, Vec3.of(pred_vel), Source.PREDICTED, prediction, gate)
        return coasting, point

    z_arr = z.array()
    if state.acquiring and state.partner_frame is not None and frame != state.partner_frame:
        point = TrackedPoint(frame, t, prediction, Vec3.of(pred_vel), Source.CORRECTED, prediction, gate)
        return coasting, point
    if float(np.linalg.norm(z_arr - pred_pos)) > gate:
        # Seed re-acquisition with the measured depth: the consistency check ties
        # depth to the current track, which is exactly what is in doubt here.
        raw, raw_replaced = _resolve(cfg, detection, prior=belief, max_jump=None)
        seeds = (state.rejected + (_Seed(frame, t, raw, raw_replaced),))[-cfg.reacquire_after :]
        restart = _reacquire(cfg, seeds)
        if restart is not None:
            return restart
        point = TrackedPoint(frame, t, prediction, Vec3.of(pred_vel), Source.CORRECTED, prediction, gate)
        return replace(coasting, rejected=seeds), point

    if state.acquiring:
        anchor = state.last_measured
        vel = endpoint_velocity(anchor.position, z, anchor.timestamp, t, cfg.gravity)
        pos_arr, vel_arr = z_arr, vel.array()
        cov = _two_point_covariance(t - anchor.timestamp, cfg.measurement_sigma**2)
    elif cfg.update == "fit":
        pos_arr, vel_arr, cov, _ = _kernels.ballistic_update(
            pred_pos, pred_vel, pred_cov, z_arr, cfg.measurement_sigma**2
        )
    else:
        # Literal two-point update between the previous emitted position and this detection.
        vel = endpoint_velocity(belief.position, z, belief.timestamp, t, cfg.gravity)
        pos_arr, vel_arr = z_arr, vel.array()
        cov = _two_point_covariance(dt, cfg.measurement_sigma**2)

    position = Vec3.of(pos_arr)
    velocity = Vec3.of(vel_arr)
    new_belief = KinematicState(position, velocity, t)
    new_state = TrackerState(new_belief, new_belief, 0, cfg, frame, cov)
    source = Source.CORRECTED if replaced else Source.MEASURED
    return new_state, TrackedPoint(frame, t, position, velocity, source, prediction, gate)


def initiate(
    stream: Sequence[Optional[Detection]], config: TrackerConfig, window: int = INITIATION_WINDOW
) -> Optional[tuple[int, int, int]]:
    """Slots ``(i, j, k)`` of the earliest consistent run of three usable detections in the first ``window`` slots.

    The detections must be consecutive among the usable ones (missed frames
    and depth holes are skipped) so an outlier cannot hide behind a longer
    baseline.  ``j`` must lie within the acquisition gate of ``i``, the arc
    through them must pass within the gate of ``k``, and the arc through
    ``j`` and ``k`` run backwards must pass within the gate of ``i``.  ``None`` if no run
    qualifies (then the first detection is trusted).
    """
    resolved = []
    for slot, det in enumerate(stream[:window]):
        if det is None:
            continue
        z, _ = _resolve(config, det, prior=None, max_jump=None)
        if z is not None:
            resolved.append((slot, det.timestamp, z))
    g = np.asarray(config.gravity)
    for (si, ti, zi), (sj, tj, zj), (sk, tk, zk) in zip(resolved, resolved[1:], resolved[2:]):
        if not ti < tj < tk or np.linalg.norm(np.subtract(zj, zi)) > config.acquisition_gate(tj - ti):
            continue
        vj = endpoint_velocity(zi, zj, ti, tj, config.gravity).array()
        flight = fly(zj.array(), vj, tk - tj, config.court, g, config.restitution)
        if float(np.linalg.norm(zk.array() - flight.position)) > config.gate_threshold:
            continue
        # Backwards check: an error at i is diluted in the forward prediction
        # by the i-j baseline but shows up in full here.
        back = tj - ti
        vk = endpoint_velocity(zj, zk, tj, tk, config.gravity).array()
        vj_back = vk - g * (tk - tj)
        pi = zj.array() - vj_back * back + 0.5 * g * back * back
        if float(np.linalg.norm(zi.array() - pi)) <= config.gate_threshold:
            return si, sj, sk
    return None


def run(detections: Iterable[Optional[Detection]], config: TrackerConfig) -> Trajectory:
    """Track a stream with one slot per frame; ``None`` marks a missed frame.

    The track is started from the detections picked by ``initiate``, so an
    outlier in the first few frames cannot seed a wrong velocity.  Slots
    before the starting detection are filled by extrapolating the initial arc
    backwards.
    """
    stream = list(detections)
    if not stream:
        raise InvalidInputError("detection stream is empty")
    if stream[0] is None:
        raise InitializationError("frame slot 0: the stream must start with a detection")
    triple = initiate(stream, config)
    start = 0 if triple is None else triple[0]
    state = init(config, stream[start])
    points: list[TrackedPoint] = []
    if triple is not None:
        partner = stream[triple[1]]
        state = replace(state, partner_frame=partner.frame_index)
        points.extend(_backfill(stream[:start], state, partner, config))
    points.append(initial_point(state))
    stale_since: Optional[int] = None
    for slot, det in enumerate(stream[start + 1 :], start=start + 1):
        try:
            state, point = step(state, det)
        except TrackingError as exc:
            raise type(exc)(f"frame slot {slot}: {exc}") from exc
        if stale_since is None and state.consecutive_predictions >= config.max_consecutive_predictions:
            stale_since = point.frame_index
        points.append(point)
        if triple is not None and slot == triple[1] and slot > start + 1:
            points[start + 1 : slot] = _fill_gap(points[start + 1 : slot], points[start], point, config)
    return Trajectory(tuple(points), trajectory_metadata("physics", points, stale_since))


def _resolve(
    cfg: TrackerConfig, det: Detection, prior: Optional[KinematicState], max_jump: Optional[float]
) -> tuple[Optional[Vec3], bool]:
    return resolve_detection(det, prior, cfg.gravity, cfg.intrinsics, cfg.pose, max_jump)


def _two_point_covariance(span: float, r: float) -> np.ndarray:
    # p1 = z1, v1 = (z1 - z0) / span + g span / 2
    cov = np.empty((3, 2, 2))
    cov[:, 0, 0] = r
    cov[:, 0, 1] = r / span
    cov[:, 1, 0] = r / span
    cov[:, 1, 1] = 2.0 * r / (span * span)
    return cov


def _reacquire(cfg: TrackerConfig, seeds: tuple[_Seed, ...]) -> Optional[tuple[TrackerState, TrackedPoint]]:
    """Start a fresh track from a run of mutually consistent rejected detections."""
    if len(seeds) < cfg.reacquire_after:
        return None
    a, b = seeds[0], seeds[1]
    vel = endpoint_velocity(a.position, b.position, a.timestamp, b.timestamp, cfg.gravity)
    pos_arr, vel_arr = b.position.array(), vel.array()
    cov = _two_point_covariance(b.timestamp - a.timestamp, cfg.measurement_sigma**2)
    t = b.timestamp
    prediction = Vec3.of(pos_arr)
    for seed in seeds[2:]:
        dt = seed.timestamp - t
        flight = fly(pos_arr, vel_arr, dt, cfg.court, np.asarray(cfg.gravity), cfg.restitution)
        pred_cov = _kernels.ballistic_predict_cov(cov, flight.jacobian, dt, cfg.accel_noise)
        z = seed.position.array()
        if float(np.linalg.norm(z - flight.position)) > cfg.gate_threshold:
            return None
        prediction = Vec3.of(flight.position)
        if cfg.update == "fit":
            pos_arr, vel_arr, cov, _ = _kernels.ballistic_update(
                flight.position, flight.velocity, pred_cov, z, cfg.measurement_sigma**2
            )
        else:
            vel_arr = endpoint_velocity(Vec3.of(pos_arr), seed.position, t, seed.timestamp, cfg.gravity).array()
            pos_arr = z
        t = seed.timestamp
    last = seeds[-1]
    position, velocity = Vec3.of(pos_arr), Vec3.of(vel_arr)
    belief = KinematicState(position, velocity, t)
    state = TrackerState(belief, belief, 0, cfg, last.frame_index, cov)
    source = Source.CORRECTED if last.replaced_depth else Source.MEASURED
    return state, TrackedPoint(last.frame_index, t, position, velocity, source, prediction, cfg.gate_threshold)


def _fill_gap(
    gap: Sequence[TrackedPoint], first: TrackedPoint, partner: TrackedPoint, cfg: TrackerConfig
) -> list[TrackedPoint]:
    """Move points emitted while acquiring onto the arc through the starting detection and its partner."""
    g = np.asarray(cfg.gravity)
    span = partner.timestamp - first.timestamp
    v_end = endpoint_velocity(first.position, partner.position, first.timestamp, partner.timestamp, cfg.gravity).array()
    v0 = v_end - g * span
    p0 = first.position.array()
    out = []
    for point in gap:
        tau = point.timestamp - first.timestamp
        position = Vec3.of(p0 + v0 * tau + 0.5 * g * tau * tau)
        out.append(replace(point, position=position, velocity=Vec3.of(v0 + g * tau), prediction=position))
    return out


def _backfill(
    early: Sequence[Optional[Detection]], state: TrackerState, partner: Detection, cfg: TrackerConfig
) -> list[TrackedPoint]:
    """Points for slots before the starting detection, on the initial arc run backwards in time."""
    if not early:
        return []
    anchor = state.belief
    z, _ = _resolve(cfg, partner, prior=None, max_jump=None)
    g = np.asarray(cfg.gravity)
    # Start-point velocity of the arc through the anchor and its partner.
    span = partner.timestamp - anchor.timestamp
    v_end = endpoint_velocity(anchor.position, z, anchor.timestamp, partner.timestamp, cfg.gravity).array()
    v0 = v_end - g * span
    p0 = anchor.position.array()
    out: list[TrackedPoint] = []
    frame, t = -1, -np.inf
    for slot, det in enumerate(early):
        if det is None:
            frame, t, source = frame + 1, t + cfg.frame_interval, Source.PREDICTED
        else:
            if not det.timestamp > t or det.frame_index <= frame:
                raise OrderingError(f"frame slot {slot}: detection at frame {det.frame_index} does not follow frame {frame}")
            frame, t, source = det.frame_index, det.timestamp, Source.CORRECTED
        tau = t - anchor.timestamp
        position = Vec3.of(p0 + v0 * tau + 0.5 * g * tau * tau)
        velocity = Vec3.of(v0 + g * tau)
        out.append(TrackedPoint(frame, t, position, velocity, source, position, cfg.gate_threshold))
    if not (anchor.timestamp > t and state.frame_index > frame):
        raise OrderingError(f"frame slot {len(early)}: detection does not follow frame {frame}")
    return out
