"""Seeded simulate -> corrupt -> track -> evaluate sweeps for both trackers."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Any, Optional, Sequence

import numpy as np

from . import metrics
from .baseline_kf import run_kf
from .collision import CollisionEvent
from .core import Detection, TrackerConfig, Trajectory
from .fileio import tracker_config
from .simulator import ScenarioSpec, corrupt, simulate_with_events
from .tracker import run as run_physics

TRACKERS = ("physics", "kf")


def run_tracker(kind: str, stream: Sequence[Optional[Detection]], config: TrackerConfig) -> Trajectory:
    if kind == "physics":
        return run_physics(stream, config)
    if kind == "kf":
        return run_kf(stream, config)
    raise ValueError(f"unknown tracker {kind!r}; expected one of {TRACKERS}")


@dataclass(frozen=True)
class SeedResult:
    seed: int
    ade: dict[str, float]
    amd: dict[str, float]


def run_seed(spec: ScenarioSpec, seed: int, overrides: Optional[dict[str, Any]] = None) -> SeedResult:
    spec = replace(spec, seed=seed)
    truth, _ = simulate_with_events(spec)
    stream = corrupt(truth, spec)
    cfg = tracker_config(spec, overrides)
    ade, amd = {}, {}
    for kind in TRACKERS:
        pred = run_tracker(kind, stream, cfg)
        ade[kind] = metrics.ade(pred, truth)
        amd[kind] = metrics.amd(pred, truth)
    return SeedResult(seed, ade, amd)


def _run_seed_args(args: tuple) -> SeedResult:
    return run_seed(*args)


def sweep(
    spec: ScenarioSpec,
    seeds: Sequence[int],
    jobs: int = 1,
    overrides: Optional[dict[str, Any]] = None,
) -> list[SeedResult]:
    """Per-seed results in seed order; ``jobs > 1`` fans seeds out to worker processes."""
    tasks = [(spec, int(s), overrides) for s in seeds]
    if jobs <= 1 or len(tasks) <= 1:
        return [_run_seed_args(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_seed_args, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))


def summarize(spec: ScenarioSpec, results: Sequence[SeedResult]) -> list[dict[str, Any]]:
    """One row per tracker: median and mean ADE/AMD over seeds."""
    rows = []
    for kind in TRACKERS:
        ade = np.array([r.ade[kind] for r in results])
        amd = np.array([r.amd[kind] for r in results])
        rows.append(
            {
                "scenario": spec.name,
                "tracker": kind,
                "seeds": len(results),
                "ade_median_m": float(np.median(ade)),
                "ade_mean_m": float(np.mean(ade)),
                "amd_median": float(np.median(amd)),
                "amd_mean": float(np.mean(amd)),
            }
        )
    return rows


def pipeline(spec: ScenarioSpec, kind: str) -> tuple[Trajectory, list[CollisionEvent], list[Optional[Detection]], Trajectory]:
    """Truth, events, detection stream and tracker output for one seeded scenario."""
    truth, events = simulate_with_events(spec)
    stream = corrupt(truth, spec)
    return truth, events, stream, run_tracker(kind, stream, tracker_config(spec))
