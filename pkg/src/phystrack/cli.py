"""Command-line interface: simulate, track, evaluate, compare, rerun.

Exit status is 0 on success, 1 when an input or output fails validation,
and 2 on usage errors.  Log verbosity comes from ``PHYSTRACK_LOG_LEVEL``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import replace
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

from . import __version__, metrics
from .core import TrackingError, validate
from .experiments import TRACKERS, run_tracker, summarize, sweep
from .fileio import (
    FORMAT_VERSION,
    RunManifest,
    config_hash,
    file_sha256,
    load_scenario,
    read_detections,
    read_manifest,
    read_trajectory,
    scenario_to_config,
    tracker_config,
    write_detections,
    write_manifest,
    write_trajectory,
)
from .simulator import builtin_scenarios, corrupt, simulate_with_events

log = logging.getLogger("phystrack")

# Options that change how a command runs but never what it writes.
_EXECUTION_ONLY = {"jobs"}


class ValidationFailure(Exception):
    pass


def _arguments(args: argparse.Namespace) -> dict[str, Any]:
    return {k: v for k, v in sorted(vars(args).items()) if k not in {"func", "command"} | _EXECUTION_ONLY}


def _dump_json(path: Path, obj: Any) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n")


def cmd_simulate(args: argparse.Namespace) -> int:
    spec, tracker = load_scenario(args.scenario)
    changes: dict[str, Any] = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.noise_sigma is not None:
        changes["noise_sigma"] = args.noise_sigma
    if args.dropout_probability is not None:
        changes["dropout_probability"] = args.dropout_probability
    if args.outlier_probability is not None:
        changes["outlier_probability"] = args.outlier_probability
    if args.no_occlusion:
        changes["dropout_windows"] = ()
    spec = replace(spec, **changes)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = scenario_to_config(spec, tracker)
    outputs = {
        "truth": str(out / "truth.jsonl"),
        "detections": str(out / "detections.jsonl"),
        "scenario": str(out / "scenario.json"),
        "manifest": str(out / "manifest.json"),
    }
    manifest = RunManifest("simulate", spec.name, config_hash(cfg), spec.seed, None, outputs, _arguments(args))
    truth, events = simulate_with_events(spec)
    stream = corrupt(truth, spec)
    write_trajectory(outputs["truth"], truth, events, manifest)
    write_detections(outputs["detections"], stream, manifest)
    _dump_json(Path(outputs["scenario"]), {**cfg, "manifest": manifest.to_dict()})
    write_manifest(outputs["manifest"], manifest)
    log.info("simulated %s: %d frames, %d collisions", spec.name, len(truth), len(events))
    return 0


def cmd_track(args: argparse.Namespace) -> int:
    spec, overrides = load_scenario(args.config)
    cfg_dict = scenario_to_config(spec, overrides)
    stream = read_detections(args.detections)
    config = tracker_config(spec, overrides)
    manifest = RunManifest(
        "track",
        spec.name,
        config_hash(cfg_dict),
        spec.seed,
        args.tracker,
        {"trajectory": str(args.out)},
        _arguments(args),
        inputs={"detections": file_sha256(args.detections)},
    )
    trajectory = run_tracker(args.tracker, stream, config)
    write_trajectory(args.out, trajectory, (), manifest)
    violations = validate(trajectory)
    if violations:
        raise ValidationFailure(f"tracker output failed validation: {violations[0]}")
    log.info("tracked %d frames with the %s tracker", len(trajectory), args.tracker)
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    pred, _, pred_header = read_trajectory(args.pred)
    truth, events, truth_header = read_trajectory(args.truth)
    for name, traj in (("prediction", pred), ("truth", truth)):
        violations = validate(traj)
        if violations:
            raise ValidationFailure(f"{name} trajectory failed validation: {violations[0]}")
    source = truth_header.get("manifest") or {}
    report = metrics.report(pred, truth, events)
    manifest = RunManifest(
        "evaluate",
        str(source.get("scenario", truth.metadata.get("scenario", ""))),
        str(source.get("config_hash", "")),
        source.get("seed"),
        (pred_header.get("manifest") or {}).get("tracker") or pred.metadata.get("tracker"),
        {"report": str(args.out)},
        _arguments(args),
        inputs={"pred": file_sha256(args.pred), "truth": file_sha256(args.truth)},
    )
    _dump_json(
        Path(args.out),
        {"format_version": FORMAT_VERSION, "kind": "metrics_report", "report": report.to_dict(), "manifest": manifest.to_dict()},
    )
    print(f"ADE {report.ade:.6g} m  AMD {report.amd:.6g}  over {report.n_points} frames")
    return 0


def _format_table(rows: Sequence[dict[str, Any]]) -> str:
    header = f"{'scenario':<18} {'tracker':<8} {'seeds':>5} {'ADE median [m]':>15} {'AMD median':>11} {'ADE mean [m]':>13}"
    lines = [header, "-" * len(header)]
    for r in rows:
        lines.append(
            f"{r['scenario']:<18} {r['tracker']:<8} {r['seeds']:>5d} {r['ade_median_m']:>15.6f} "
            f"{r['amd_median']:>11.6f} {r['ade_mean_m']:>13.6f}"
        )
    return "\n".join(lines)


def cmd_compare(args: argparse.Namespace) -> int:
    if args.scenario == "all":
        loaded = [(spec, {}) for spec in builtin_scenarios()]
    else:
        loaded = [load_scenario(args.scenario)]
    seeds = range(args.base_seed, args.base_seed + args.seeds)
    rows: list[dict[str, Any]] = []
    configs = []
    started = time.perf_counter()
    for spec, overrides in loaded:
        results = sweep(spec, seeds, jobs=args.jobs, overrides=overrides)
        rows.extend(summarize(spec, results))
        configs.append(scenario_to_config(spec, overrides))
    log.info("compare finished in %.2f s", time.perf_counter() - started)
    table = _format_table(rows)
    print(table)
    if args.out:
        manifest = RunManifest(
            "compare",
            args.scenario,
            config_hash(configs[0] if len(configs) == 1 else {"scenarios": configs}),
            args.base_seed,
            ",".join(TRACKERS),
            {"table": str(args.out)},
            _arguments(args),
        )
        _dump_json(
            Path(args.out),
            {"format_version": FORMAT_VERSION, "kind": "comparison", "rows": rows, "manifest": manifest.to_dict()},
        )
    return 0


def cmd_rerun(args: argparse.Namespace) -> int:
    manifest = read_manifest(args.manifest)
    if manifest.command not in _COMMANDS or manifest.command == "rerun":
        raise ValidationFailure(f"manifest names an unknown command {manifest.command!r}")
    namespace = argparse.Namespace(**manifest.arguments, jobs=args.jobs, command=manifest.command)
    return _COMMANDS[manifest.command](namespace)


_COMMANDS: dict[str, Callable[[argparse.Namespace], int]] = {
    "simulate": cmd_simulate,
    "track": cmd_track,
    "evaluate": cmd_evaluate,
    "compare": cmd_compare,
    "rerun": cmd_rerun,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="phystrack", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write ground truth, a corrupted detection stream and a manifest")
    p.add_argument("--scenario", required=True, help="builtin scenario name or scenario config file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.add_argument("--noise-sigma", type=float, help="override detection noise [m]")
    p.add_argument("--dropout-probability", type=float, help="override i.i.d. dropout probability")
    p.add_argument("--outlier-probability", type=float, help="override outlier probability")
    p.add_argument("--no-occlusion", action="store_true", help="drop the scenario's occlusion windows")

    p = sub.add_parser("track", help="run a tracker over a detection stream")
    p.add_argument("--detections", required=True, help="detection JSONL file")
    p.add_argument("--config", required=True, help="scenario config file or builtin scenario name")
    p.add_argument("--tracker", choices=TRACKERS, default="physics")
    p.add_argument("--out", required=True, help="output trajectory JSONL file")

    p = sub.add_parser("evaluate", help="ADE/AMD report of a trajectory against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--out", required=True, help="output report JSON file")

    p = sub.add_parser("compare", help="both trackers over many seeds")
    p.add_argument("--scenario", required=True, help="builtin name, config file, or 'all'")
    p.add_argument("--seeds", type=int, default=100)
    p.add_argument("--base-seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1, help="worker processes (output does not depend on this)")
    p.add_argument("--out", help="output comparison JSON file")

    p = sub.add_parser("rerun", help="repeat a run from its manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--jobs", type=int, default=1)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    level = os.environ.get("PHYSTRACK_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(
        level=level if isinstance(logging.getLevelName(level), int) else "WARNING",
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "seeds", 1) < 1 or getattr(args, "jobs", 1) < 1:
        parser.print_usage(sys.stderr)
        print("phystrack: error: --seeds and --jobs must be positive", file=sys.stderr)
        return 2
    try:
        return _COMMANDS[args.command](args)
    except (TrackingError, ValidationFailure, OSError) as exc:
        print(f"phystrack {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
