"""Acceptance criteria, each at its stated tolerance.

Every test prints one ``PASS``/``FAIL`` line; the lines are repeated in the
terminal summary so ``pytest -v | tee`` captures them in one place.
"""

import json
import time
from dataclasses import replace

import numpy as np
import pytest
from oracles import ade_naive, amd_naive

from phystrack.cli import main
from phystrack.collision import reflect_velocity
from phystrack.core import CourtGeometry, KinematicState, Source, Vec3
from phystrack.experiments import summarize, sweep
from phystrack.fileio import tracker_config
from phystrack.metrics import ade, amd
from phystrack.simulator import (
    ScenarioSpec,
    builtin_scenarios,
    corrupt,
    corrupt_with_log,
    scenario_by_name,
    simulate,
    simulate_with_events,
)
from phystrack.tracker import run

RESULTS: list[str] = []


def verdict(number, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def test_criterion_1_physics_beats_kf():
    started = time.perf_counter()
    rows = []
    for spec in builtin_scenarios():
        rows.extend(summarize(spec, sweep(spec, range(100))))
    elapsed = time.perf_counter() - started
    medians = {(r["scenario"], r["tracker"]): r["ade_median_m"] for r in rows}
    details, ok = [], elapsed < 60.0
    for spec in builtin_scenarios():
        phys, kf = medians[(spec.name, "physics")], medians[(spec.name, "kf")]
        collisions = len(simulate_with_events(spec)[1]) > 0
        reduction = 1.0 - phys / kf
        good = phys <= 1.1 * kf and (reduction >= 0.40 if collisions else True)
        ok &= good
        details.append(f"{spec.name} phys={phys:.4f} kf={kf:.4f} reduction={100 * reduction:.1f}%{'' if collisions else ' (no collisions)'}")
    verdict(1, ok, "; ".join(details) + f"; sweep {elapsed:.1f} s")


def test_criterion_2_oracle_equivalence():
    worst = {}
    for spec in builtin_scenarios():
        spec = replace(spec, noise_sigma=0.0, dropout_probability=0.0, dropout_windows=(), outlier_probability=0.0, invalid_depth_probability=0.0)
        truth = simulate(spec)
        worst[spec.name] = ade(run(corrupt(truth, spec), tracker_config(spec)), truth)
    verdict(2, all(v < 1e-9 for v in worst.values()), "ADE " + ", ".join(f"{k}={v:.2e}" for k, v in worst.items()) + " (limit 1e-9 m)")


def test_criterion_3_gap_interpolation():
    spec = replace(scenario_by_name("occlusion"), noise_sigma=0.0, dropout_probability=0.0, dropout_windows=((30, 34),))
    truth, events = simulate_with_events(spec)
    assert events == []
    stream = corrupt(truth, spec)
    assert [k for k, d in enumerate(stream) if d is None] == [30, 31, 32, 33, 34]
    traj = run(stream, tracker_config(spec))
    gap = slice(30, 35)
    assert all(p.source is Source.PREDICTED for p in traj.points[gap])
    err = np.linalg.norm(traj.positions()[gap] - truth.positions()[gap], axis=1).max()
    verdict(3, err < 1e-6, f"max gap error {err:.2e} m over 5 missed frames (limit 1e-6 m)")


def test_criterion_4_collision_physics():
    rng = np.random.default_rng(4)
    worst_t, worst_n = 0.0, 0.0
    for _ in range(2000):
        v = Vec3.of(rng.normal(size=3) * 20)
        axis, sign = int(rng.integers(3)), float(rng.choice([-1.0, 1.0]))
        n = np.zeros(3)
        n[axis] = sign
        e = float(rng.uniform(0.0, 1.0))
        out = np.asarray(reflect_velocity(v, Vec3.of(n), e))
        vin = np.asarray(v)
        tangential = [k for k in range(3) if k != axis]
        worst_t = max(worst_t, float(np.abs(out[tangential] - vin[tangential]).max()))
        worst_n = max(worst_n, abs(out[axis] + e * vin[axis]) / max(1.0, abs(vin[axis])))

    court = CourtGeometry(Vec3(0, 0, 0), Vec3(6.096, 6.096, 12.192), restitution=1.0)
    spec = ScenarioSpec("elastic", court, KinematicState(Vec3(1.0, 3.0, 2.0), Vec3(7.0, -4.0, 18.0), 0.0), 5.0, 60.0)
    truth, events = simulate_with_events(spec)
    energy = 0.5 * np.sum(truth.velocities() ** 2, axis=1) + 9.81 * truth.positions()[:, 1]
    drift = float(np.abs(energy - energy[0]).max() / energy[0])

    drop_court = CourtGeometry(Vec3(0, 0, 0), Vec3(4, 4, 4))
    drop = ScenarioSpec("drop", drop_court, KinematicState(Vec3(2, 1, 2), Vec3(0, 0, 0), 0.0), 1.4, 10_000.0)
    dtruth, devents = simulate_with_events(drop)
    after = int(np.searchsorted(dtruth.timestamps(), devents[0].time, side="right"))
    p, v = dtruth.points[after].position, dtruth.points[after].velocity
    apex = p[1] + v[1] ** 2 / (2 * 9.81)
    ok = worst_t == 0.0 and worst_n <= 1e-12 and len(events) >= 10 and drift <= 1e-9 and abs(apex - 0.9025) <= 1e-6
    verdict(
        4, ok,
        f"tangential max diff {worst_t:.1e}, normal scaling error {worst_n:.1e}; "
        f"e=1 energy drift {drift:.1e} over {len(events)} bounces; e=0.95 apex ratio {apex:.9f}",
    )


def test_criterion_5_metrics_oracle():
    from test_metrics import pair

    rng = np.random.default_rng(5)
    worst_ade = worst_amd = worst_affine = 0.0
    for trial in range(1000):
        n = int(rng.integers(4, 51))
        a, b = pair(n, 10_000 + trial)
        pa, pb = a.positions().tolist(), b.positions().tolist()
        ref_ade, ref_amd = ade_naive(pa, pb), amd_naive(pa, pb)
        worst_ade = max(worst_ade, abs(ade(a, b) - ref_ade) / max(1.0, ref_ade))
        worst_amd = max(worst_amd, abs(amd(a, b) - ref_amd) / max(1.0, ref_amd))
        m = rng.normal(size=(3, 3))
        while abs(np.linalg.det(m)) < 0.1:
            m = rng.normal(size=(3, 3))
        shift = rng.normal(size=3) * 10
        moved = amd(
            type(a)(tuple(replace(p, position=Vec3.of(m @ np.asarray(p.position) + shift)) for p in a.points)),
            type(b)(tuple(replace(p, position=Vec3.of(m @ np.asarray(p.position) + shift)) for p in b.points)),
        )
        worst_affine = max(worst_affine, abs(moved - amd(a, b)) / max(1.0, amd(a, b)))
    ok = worst_ade <= 1e-12 and worst_amd <= 1e-12 and worst_affine <= 1e-9
    verdict(5, ok, f"1000 pairs: ADE err {worst_ade:.1e}, AMD err {worst_amd:.1e} (limit 1e-12); affine AMD change {worst_affine:.1e} (limit 1e-9)")


def test_criterion_6_gate_behavior():
    outliers = corrected = violations = measured = 0
    for spec in builtin_scenarios():
        for seed in range(100):
            s = replace(spec, seed=seed, outlier_probability=0.05, outlier_magnitude=1.0)
            stream, log = corrupt_with_log(simulate(s), s)
            traj = run(stream, tracker_config(s))
            outliers += len(log.outliers)
            corrected += sum(traj.points[k].source is Source.CORRECTED for k in log.outliers)
            for p in traj.points:
                if p.source is Source.MEASURED and p.prediction is not None:
                    measured += 1
                    violations += np.linalg.norm(np.subtract(p.position, p.prediction)) > p.gate
    rate = corrected / outliers
    verdict(
        6, rate >= 0.99 and violations == 0,
        f"{corrected}/{outliers} outliers Corrected ({100 * rate:.2f}%, limit 99%); "
        f"{violations} of {measured} gated Measured points beyond the gate (limit 0)",
    )


def _snapshot(paths):
    return {str(p): p.read_bytes() for p in paths}


def test_criterion_7_determinism(tmp_path):
    sim = tmp_path / "sim"
    outputs = {
        "track_physics": tmp_path / "physics.jsonl",
        "track_kf": tmp_path / "kf.jsonl",
        "evaluate": tmp_path / "report.json",
        "compare": tmp_path / "table.json",
    }
    commands = {
        "simulate": ["simulate", "--scenario", "mixed-collision", "--seed", "3", "--outlier-probability", "0.05", "--out", str(sim)],
        "track_physics": ["track", "--detections", str(sim / "detections.jsonl"), "--config", str(sim / "scenario.json"), "--tracker", "physics", "--out", str(outputs["track_physics"])],
        "track_kf": ["track", "--detections", str(sim / "detections.jsonl"), "--config", str(sim / "scenario.json"), "--tracker", "kf", "--out", str(outputs["track_kf"])],
        "evaluate": ["evaluate", "--pred", str(outputs["track_physics"]), "--truth", str(sim / "truth.jsonl"), "--out", str(outputs["evaluate"])],
        "compare": ["compare", "--scenario", "all", "--seeds", "8", "--out", str(outputs["compare"])],
    }
    for argv in commands.values():
        assert main(argv) == 0
    files = [sim / n for n in ("truth.jsonl", "detections.jsonl", "scenario.json", "manifest.json")] + list(outputs.values())
    first = _snapshot(files)

    # Each output embeds its manifest; extract them, delete the outputs, rerun.
    manifests = {"simulate": tmp_path / "simulate.manifest.json"}
    manifests["simulate"].write_bytes((sim / "manifest.json").read_bytes())
    for name, path in outputs.items():
        text = path.read_text()
        obj = json.loads(text.splitlines()[0]) if path.suffix == ".jsonl" else json.loads(text)
        manifests[name] = tmp_path / f"{name}.manifest.json"
        manifests[name].write_text(json.dumps(obj["manifest"]))
    mismatched = []
    for jobs in ("1", "2"):
        for path in files:
            path.unlink()
        for name in commands:
            assert main(["rerun", "--manifest", str(manifests[name]), "--jobs", jobs]) == 0
        again = _snapshot(files)
        mismatched += [f"{k} (jobs={jobs})" for k in first if again[k] != first[k]]
    verdict(7, not mismatched, f"{len(files)} files rerun serial and with 2 workers: " + ("byte-identical" if not mismatched else "differ: " + ", ".join(mismatched)))
