"""File formats: JSONL detection streams and trajectories, JSON scenario configs, run manifests.

Floats are written with Python's shortest round-trip ``repr`` (at most 17
significant digits), so a write/read cycle reproduces every value bit for
bit.  Every file carries ``format_version``; JSONL files put it in an
optional first header line that also holds the run manifest.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence, Union

from . import __version__
from .collision import CollisionEvent
from .core import (
    CourtGeometry,
    Detection,
    KinematicState,
    Source,
    TrackedPoint,
    TrackerConfig,
    TrackingError,
    Trajectory,
    Vec3,
)
from .depth import CameraIntrinsics, CameraPose
from .simulator import ScenarioSpec, scenario_by_name

FORMAT_VERSION = 1
PathLike = Union[str, Path]


class ParseError(TrackingError, ValueError):
    """Malformed input file; the message names the file and line."""


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True, allow_nan=False)


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode("ascii")).hexdigest()


def file_sha256(path: PathLike) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass(frozen=True)
class RunManifest:
    """Everything needed to reproduce one CLI invocation.

    ``arguments`` are the parsed CLI options of ``command``; ``rerun`` feeds
    them back through the same code path.
    """

    command: str
    scenario: str
    config_hash: str
    seed: Optional[int]
    tracker: Optional[str]
    outputs: dict[str, str]
    arguments: dict[str, Any]
    inputs: dict[str, str] = field(default_factory=dict)
    tool_version: str = __version__
    format_version: int = FORMAT_VERSION

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunManifest":
        known = {f.name for f in fields(cls)}
        missing = {"command", "scenario", "config_hash", "seed", "tracker", "outputs", "arguments"} - data.keys()
        if missing:
            raise ParseError(f"manifest is missing {sorted(missing)}")
        return cls(**{k: v for k, v in data.items() if k in known})


def write_manifest(path: PathLike, manifest: RunManifest) -> None:
    Path(path).write_text(json.dumps(manifest.to_dict(), sort_keys=True, indent=2) + "\n")


def read_manifest(path: PathLike) -> RunManifest:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ParseError(f"{path}: manifest must be a JSON object")
    _check_version(data, path)
    return RunManifest.from_dict(data)


# -- scalar helpers ---------------------------------------------------------


def _encode_float(x: float) -> Union[float, str]:
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return float(x)


def _decode_float(x: Any) -> float:
    if isinstance(x, str):
        if x in ("nan", "inf", "-inf"):
            return float(x)
        raise ValueError(f"unexpected string {x!r} where a number was expected")
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ValueError(f"expected a number, got {x!r}")
    return float(x)


def _vec(x: Any, n: int = 3) -> tuple[float, ...]:
    if not isinstance(x, list) or len(x) != n:
        raise ValueError(f"expected a list of {n} numbers, got {x!r}")
    return tuple(_decode_float(c) for c in x)


def _check_version(header: dict, where: Any) -> None:
    version = header.get("format_version")
    if version != FORMAT_VERSION:
        raise ParseError(f"{where}: unsupported format_version {version!r} (expected {FORMAT_VERSION})")


def _dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


# -- detections -------------------------------------------------------------


def detection_to_record(det: Detection) -> dict:
    rec: dict[str, Any] = {"frame": det.frame_index, "t_s": float(det.timestamp), "confidence": float(det.confidence)}
    if det.pixel_center is not None:
        rec["pixel_px"] = [float(c) for c in det.pixel_center]
    if det.depth is not None:
        rec["depth_m"] = _encode_float(det.depth)
    if det.world_position is not None:
        rec["position_m"] = [float(c) for c in det.world_position]
    return rec


def detection_from_record(rec: dict) -> Detection:
    if not isinstance(rec, dict):
        raise ValueError(f"expected an object or null, got {rec!r}")
    frame = rec["frame"]
    if isinstance(frame, bool) or not isinstance(frame, int):
        raise ValueError(f"frame must be an integer, got {frame!r}")
    return Detection(
        frame_index=frame,
        timestamp=_decode_float(rec["t_s"]),
        pixel_center=_vec(rec["pixel_px"], 2) if "pixel_px" in rec else None,
        depth=_decode_float(rec["depth_m"]) if "depth_m" in rec else None,
        world_position=Vec3(*_vec(rec["position_m"])) if "position_m" in rec else None,
        confidence=_decode_float(rec.get("confidence", 1.0)),
    )


def write_detections(path: PathLike, stream: Sequence[Optional[Detection]], manifest: Optional[RunManifest] = None) -> None:
    lines = []
    if manifest is not None:
        lines.append(_dumps({"format_version": FORMAT_VERSION, "kind": "detections", "manifest": manifest.to_dict()}))
    for det in stream:
        lines.append("null" if det is None else _dumps(detection_to_record(det)))
    Path(path).write_text("".join(line + "\n" for line in lines))


def read_detections_with_header(path: PathLike) -> tuple[list[Optional[Detection]], Optional[dict]]:
    stream: list[Optional[Detection]] = []
    header = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                if lineno == 1 and isinstance(obj, dict) and "format_version" in obj:
                    _check_version(obj, f"{path}:1")
                    header = obj
                    continue
                stream.append(None if obj is None else detection_from_record(obj))
            except ParseError:
                raise
            except (ValueError, KeyError, TypeError) as exc:
                raise ParseError(f"{path}:{lineno}: {exc.__class__.__name__}: {exc}") from exc
    return stream, header


def read_detections(path: PathLike) -> list[Optional[Detection]]:
    return read_detections_with_header(path)[0]


# -- trajectories -----------------------------------------------------------


def point_to_record(p: TrackedPoint) -> dict:
    return {
        "frame": p.frame_index,
        "t_s": float(p.timestamp),
        "position_m": [float(c) for c in p.position],
        "velocity_mps": [float(c) for c in p.velocity],
        "source": Source(p.source).value,
        "prediction_m": None if p.prediction is None else [float(c) for c in p.prediction],
        "gate_m": None if p.gate is None else float(p.gate),
    }


def point_from_record(rec: dict) -> TrackedPoint:
    prediction = rec.get("prediction_m")
    gate = rec.get("gate_m")
    return TrackedPoint(
        frame_index=int(rec["frame"]),
        timestamp=_decode_float(rec["t_s"]),
        position=Vec3(*_vec(rec["position_m"])),
        velocity=Vec3(*_vec(rec["velocity_mps"])),
        source=Source(rec["source"]),
        prediction=None if prediction is None else Vec3(*_vec(prediction)),
        gate=None if gate is None else _decode_float(gate),
    )


def event_to_record(e: CollisionEvent) -> dict:
    return {
        "axis": e.surface_axis,
        "normal": [float(c) for c in e.surface_normal],
        "fraction": float(e.impact_fraction),
        "point_m": [float(c) for c in e.impact_point],
        "t_s": None if e.time is None else float(e.time),
    }


def event_from_record(rec: dict) -> CollisionEvent:
    return CollisionEvent(
        surface_axis=int(rec["axis"]),
        surface_normal=Vec3(*_vec(rec["normal"])),
        impact_fraction=_decode_float(rec["fraction"]),
        impact_point=Vec3(*_vec(rec["point_m"])),
        time=None if rec.get("t_s") is None else _decode_float(rec["t_s"]),
    )


def write_trajectory(
    path: PathLike,
    trajectory: Trajectory,
    events: Iterable[CollisionEvent] = (),
    manifest: Optional[RunManifest] = None,
) -> None:
    header = {
        "format_version": FORMAT_VERSION,
        "kind": "trajectory",
        "metadata": dict(trajectory.metadata),
        "events": [event_to_record(e) for e in events],
        "manifest": None if manifest is None else manifest.to_dict(),
    }
    lines = [_dumps(header)] + [_dumps(point_to_record(p)) for p in trajectory.points]
    Path(path).write_text("".join(line + "\n" for line in lines))


def read_trajectory(path: PathLike) -> tuple[Trajectory, list[CollisionEvent], dict]:
    """Trajectory, collision events and the raw header of a trajectory file."""
    points = []
    header: Optional[dict] = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                if header is None:
                    if not isinstance(obj, dict) or obj.get("kind") != "trajectory":
                        raise ValueError("first line must be a trajectory header")
                    _check_version(obj, f"{path}:{lineno}")
                    header = obj
                    continue
                points.append(point_from_record(obj))
            except ParseError:
                raise
            except (ValueError, KeyError, TypeError) as exc:
                raise ParseError(f"{path}:{lineno}: {exc.__class__.__name__}: {exc}") from exc
    if header is None:
        raise ParseError(f"{path}: empty trajectory file")
    try:
        events = [event_from_record(r) for r in header.get("events", [])]
        metadata = {str(k): str(v) for k, v in header.get("metadata", {}).items()}
    except (ValueError, KeyError, TypeError) as exc:
        raise ParseError(f"{path}:1: bad header: {exc}") from exc
    return Trajectory(tuple(points), metadata), events, header


# -- scenario configs -------------------------------------------------------

_TRACKER_KEYS = {
    "gate_threshold_m": "gate_threshold",
    "max_speed_mps": "max_speed",
    "measurement_sigma_m": "measurement_sigma",
    "accel_noise_m2ps3": "accel_noise",
    "update": "update",
    "reacquire_after_frames": "reacquire_after",
    "max_consecutive_predictions_frames": "max_consecutive_predictions",
    "kf_process_noise_m2ps5": "kf_process_noise",
    "kf_gate_probability": "kf_gate_probability",
}


def scenario_to_config(spec: ScenarioSpec, tracker: Optional[dict[str, Any]] = None) -> dict:
    """Scenario as a JSON-ready dict with units in the key names."""
    court = spec.court
    cfg: dict[str, Any] = {
        "format_version": FORMAT_VERSION,
        "name": spec.name,
        "description": spec.description,
        "court": {"min_corner_m": list(court.min_corner), "max_corner_m": list(court.max_corner)},
        "gravity_mps2": list(court.gravity),
        "restitution": court.restitution,
        "initial": {
            "position_m": list(spec.initial.position),
            "velocity_mps": list(spec.initial.velocity),
            "time_s": spec.initial.timestamp,
        },
        "duration_s": spec.duration,
        "fps_hz": spec.fps,
        "noise_sigma_m": spec.noise_sigma,
        "dropout_probability": spec.dropout_probability,
        "dropout_windows_frames": [list(w) for w in spec.dropout_windows],
        "outlier_probability": spec.outlier_probability,
        "outlier_magnitude_m": spec.outlier_magnitude,
        "invalid_depth_probability": spec.invalid_depth_probability,
        "seed": spec.seed,
        "camera": None,
    }
    if spec.intrinsics is not None:
        intr = spec.intrinsics
        pose = spec.pose or CameraPose()
        cfg["camera"] = {
            "fx_px": intr.fx,
            "fy_px": intr.fy,
            "cx_px": intr.cx,
            "cy_px": intr.cy,
            "width_px": intr.width,
            "height_px": intr.height,
            "rotation_camera_to_world": [list(row) for row in pose.rotation],
            "position_m": list(pose.position),
        }
    if tracker:
        unknown = set(tracker) - set(_TRACKER_KEYS)
        if unknown:
            raise ParseError(f"unknown tracker keys {sorted(unknown)}")
        cfg["tracker"] = dict(tracker)
    return cfg


def scenario_from_config(cfg: dict) -> tuple[ScenarioSpec, dict[str, Any]]:
    """Inverse of ``scenario_to_config``; returns the spec and the tracker section."""
    try:
        _check_version(cfg, "scenario config")
        court = CourtGeometry(
            Vec3(*_vec(cfg["court"]["min_corner_m"])),
            Vec3(*_vec(cfg["court"]["max_corner_m"])),
            Vec3(*_vec(cfg.get("gravity_mps2", [0.0, -9.81, 0.0]))),
            float(cfg.get("restitution", 0.95)),
        )
        init = cfg["initial"]
        initial = KinematicState(
            Vec3(*_vec(init["position_m"])), Vec3(*_vec(init["velocity_mps"])), float(init.get("time_s", 0.0))
        )
        intrinsics = pose = None
        cam = cfg.get("camera")
        if cam is not None:
            intrinsics = CameraIntrinsics(
                float(cam["fx_px"]), float(cam["fy_px"]), float(cam["cx_px"]), float(cam["cy_px"]),
                int(cam["width_px"]), int(cam["height_px"]),
            )
            rotation = cam.get("rotation_camera_to_world", [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
            pose = CameraPose(tuple(_vec(row) for row in rotation), Vec3(*_vec(cam.get("position_m", [0.0, 0.0, 0.0]))))
        spec = ScenarioSpec(
            name=str(cfg["name"]),
            court=court,
            initial=initial,
            duration=float(cfg["duration_s"]),
            fps=float(cfg.get("fps_hz", 60.0)),
            noise_sigma=float(cfg.get("noise_sigma_m", 0.0)),
            dropout_probability=float(cfg.get("dropout_probability", 0.0)),
            dropout_windows=tuple(tuple(w) for w in cfg.get("dropout_windows_frames", [])),
            outlier_probability=float(cfg.get("outlier_probability", 0.0)),
            outlier_magnitude=float(cfg.get("outlier_magnitude_m", 1.0)),
            invalid_depth_probability=float(cfg.get("invalid_depth_probability", 0.0)),
            seed=int(cfg.get("seed", 0)),
            intrinsics=intrinsics,
            pose=pose,
            description=str(cfg.get("description", "")),
        )
        tracker = dict(cfg.get("tracker") or {})
    except ParseError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"scenario config: {exc.__class__.__name__}: {exc}") from exc
    unknown = set(tracker) - set(_TRACKER_KEYS)
    if unknown:
        raise ParseError(f"scenario config: unknown tracker keys {sorted(unknown)}")
    return spec, tracker


def write_scenario(path: PathLike, spec: ScenarioSpec, tracker: Optional[dict[str, Any]] = None) -> None:
    Path(path).write_text(json.dumps(scenario_to_config(spec, tracker), indent=2) + "\n")


def read_scenario(path: PathLike) -> tuple[ScenarioSpec, dict[str, Any]]:
    try:
        cfg = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ParseError(f"{path}: scenario config must be a JSON object")
    return scenario_from_config(cfg)


def load_scenario(name_or_path: str) -> tuple[ScenarioSpec, dict[str, Any]]:
    """A builtin scenario by name, or a scenario config file."""
    try:
        return scenario_by_name(name_or_path), {}
    except KeyError:
        pass
    path = Path(name_or_path)
    if not path.is_file():
        raise ParseError(f"{name_or_path!r} is neither a builtin scenario nor a config file")
    return read_scenario(path)


def tracker_config(spec: ScenarioSpec, overrides: Optional[dict[str, Any]] = None) -> TrackerConfig:
    """Tracker settings matching a scenario's court, frame rate and camera.

    The measurement sigma defaults to the scenario's noise level when it has
    one; config-file ``tracker`` keys override everything.
    """
    base = TrackerConfig(
        court=spec.court,
        frame_interval=spec.frame_interval,
        measurement_sigma=spec.noise_sigma if spec.noise_sigma > 0 else TrackerConfig.measurement_sigma,
        intrinsics=spec.intrinsics,
        pose=spec.pose,
    )
    if not overrides:
        return base
    return replace(base, **{_TRACKER_KEYS[k]: v for k, v in overrides.items()})
