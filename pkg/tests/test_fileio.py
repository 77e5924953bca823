import json
import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from phystrack.core import Detection, Source, TrackedPoint, Trajectory, Vec3, validate
from phystrack.fileio import (
    FORMAT_VERSION,
    ParseError,
    RunManifest,
    config_hash,
    load_scenario,
    read_detections,
    read_detections_with_header,
    read_manifest,
    read_scenario,
    read_trajectory,
    scenario_from_config,
    scenario_to_config,
    tracker_config,
    write_detections,
    write_manifest,
    write_scenario,
    write_trajectory,
)
from phystrack.simulator import builtin_scenarios, corrupt, scenario_by_name, simulate_with_events

tmp_settings = settings(suppress_health_check=[HealthCheck.function_scoped_fixture])
finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)
vec = st.builds(Vec3, finite, finite, finite)


def test_empty_file_is_empty_stream(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    assert read_detections(path) == []


def test_nan_depth_is_a_detection_not_an_error(tmp_path):
    path = tmp_path / "d.jsonl"
    path.write_text('{"frame": 0, "t_s": 0.0, "pixel_px": [640, 360], "depth_m": "nan"}\nnull\n{"frame": 2, "t_s": 0.1, "pixel_px": [1, 2], "depth_m": "inf"}\n')
    stream = read_detections(path)
    assert math.isnan(stream[0].depth) and stream[1] is None and math.isinf(stream[2].depth)


@pytest.mark.parametrize(
    "body, lineno",
    [
        ('null\n{"frame": 1, "t_s": "soon"}\n', 2),
        ('null\nnull\n{"frame": 2\n', 3),
        ('{"t_s": 0.0}\n', 1),
        ('{"frame": 1.5, "t_s": 0.0}\n', 1),
        ('{"frame": 0, "t_s": 0.0, "position_m": [1, 2]}\n', 1),
    ],
)
def test_parse_errors_carry_line_numbers(tmp_path, body, lineno):
    path = tmp_path / "bad.jsonl"
    path.write_text(body)
    with pytest.raises(ParseError, match=f"bad.jsonl:{lineno}:"):
        read_detections(path)


def test_unsupported_version_is_rejected(tmp_path):
    path = tmp_path / "v.jsonl"
    path.write_text(json.dumps({"format_version": 99, "kind": "detections"}) + "\nnull\n")
    with pytest.raises(ParseError, match="format_version"):
        read_detections(path)


@pytest.mark.parametrize("spec", builtin_scenarios(), ids=lambda s: s.name)
def test_corrupted_stream_round_trip(tmp_path, spec):
    truth, _ = simulate_with_events(spec)
    stream = corrupt(truth, spec)
    manifest = RunManifest("simulate", spec.name, "abc", spec.seed, None, {"detections": "d.jsonl"}, {})
    path = tmp_path / "d.jsonl"
    write_detections(path, stream, manifest)
    back, header = read_detections_with_header(path)
    assert header["format_version"] == FORMAT_VERSION and header["manifest"]["scenario"] == spec.name
    assert len(back) == len(stream)
    for a, b in zip(stream, back):
        if a is None or b is None:
            assert a is b
            continue
        assert (a.frame_index, a.timestamp, a.pixel_center, a.world_position, a.confidence) == (
            b.frame_index, b.timestamp, b.pixel_center, b.world_position, b.confidence,
        )
        assert a.depth == b.depth or (math.isnan(a.depth) and math.isnan(b.depth))


@st.composite
def trajectories(draw):
    n = draw(st.integers(0, 20))
    t0 = draw(st.floats(-1e3, 1e3))
    steps = draw(st.lists(st.floats(1e-4, 1.0), min_size=n, max_size=n))
    frame_steps = draw(st.lists(st.integers(1, 3), min_size=n, max_size=n))
    points, t, f = [], t0, draw(st.integers(0, 100))
    for dt, df in zip(steps, frame_steps):
        source = draw(st.sampled_from(list(Source)))
        prediction = draw(st.none() | vec)
        gate = None if prediction is None else draw(st.floats(0.0, 10.0))
        points.append(TrackedPoint(f, t, draw(vec), draw(vec), source, prediction, gate))
        t, f = t + dt, f + df
    return Trajectory(tuple(points), {"tracker": "physics", "units": "m"})


@tmp_settings
@given(trajectories())
def test_trajectory_round_trip_is_exact(tmp_path, traj):
    assert validate(traj) == []
    path = tmp_path / "traj.jsonl"
    write_trajectory(path, traj)
    back, events, header = read_trajectory(path)
    assert back == traj and events == [] and header["kind"] == "trajectory"
    assert validate(back) == []


def test_trajectory_events_and_manifest_round_trip(tmp_path):
    spec = scenario_by_name("bounce-multi")
    truth, events = simulate_with_events(spec)
    manifest = RunManifest("simulate", spec.name, "h", 0, None, {"truth": "t"}, {"scenario": "bounce-multi"})
    path = tmp_path / "truth.jsonl"
    write_trajectory(path, truth, events, manifest)
    back, back_events, header = read_trajectory(path)
    assert back == truth and back_events == list(events)
    assert header["manifest"] == manifest.to_dict()
    text = path.read_text()
    write_trajectory(path, back, back_events, manifest)
    assert path.read_text() == text


def test_trajectory_file_errors(tmp_path):
    path = tmp_path / "t.jsonl"
    path.write_text("")
    with pytest.raises(ParseError, match="empty"):
        read_trajectory(path)
    path.write_text('{"frame": 0}\n')
    with pytest.raises(ParseError, match="t.jsonl:1:"):
        read_trajectory(path)


def test_manifest_round_trip(tmp_path):
    m = RunManifest("track", "occlusion", "ff", 3, "kf", {"trajectory": "x.jsonl"}, {"tracker": "kf"}, inputs={"detections": "aa"})
    write_manifest(tmp_path / "m.json", m)
    assert read_manifest(tmp_path / "m.json") == m


@pytest.mark.parametrize("spec", builtin_scenarios(), ids=lambda s: s.name)
def test_scenario_config_round_trip(tmp_path, spec):
    overrides = {"gate_threshold_m": 0.7, "update": "finite-difference"}
    path = tmp_path / "scenario.json"
    write_scenario(path, spec, overrides)
    back, back_overrides = read_scenario(path)
    assert back == spec and back_overrides == overrides
    assert config_hash(scenario_to_config(back, back_overrides)) == config_hash(scenario_to_config(spec, overrides))
    assert load_scenario(str(path)) == (back, back_overrides)
    assert tracker_config(back, back_overrides).gate_threshold == 0.7


def test_config_keys_carry_units():
    cfg = scenario_to_config(scenario_by_name("depth-sweep"))
    assert {"gravity_mps2", "duration_s", "fps_hz", "noise_sigma_m"} <= set(cfg)
    assert "position_m" in cfg["initial"] and "fx_px" in cfg["camera"]


def test_config_hash_is_canonical():
    a = {"b": 1, "a": [1.0, 2.0], "c": {"y": 1, "x": 2}}
    b = {"c": {"x": 2, "y": 1}, "a": [1.0, 2.0], "b": 1}
    assert config_hash(a) == config_hash(b)
    assert config_hash(a) != config_hash({**a, "b": 2})
    assert len(config_hash(a)) == 64


def test_bad_configs(tmp_path):
    with pytest.raises(ParseError):
        load_scenario(str(tmp_path / "nope.json"))
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ParseError):
        read_scenario(path)
    cfg = scenario_to_config(scenario_by_name("occlusion"))
    with pytest.raises(ParseError, match="initial"):
        scenario_from_config({k: v for k, v in cfg.items() if k != "initial"})
    with pytest.raises(ParseError, match="unknown tracker keys"):
        scenario_from_config({**cfg, "tracker": {"gate": 1.0}})
    with pytest.raises(ParseError):
        scenario_from_config({**cfg, "fps_hz": -1.0})


def test_measurement_sigma_follows_scenario_noise():
    spec = scenario_by_name("occlusion")
    assert tracker_config(spec).measurement_sigma == spec.noise_sigma
    from dataclasses import replace

    assert tracker_config(replace(spec, noise_sigma=0.0)).measurement_sigma == 0.01
