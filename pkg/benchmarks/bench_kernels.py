"""Time the hot kernels and a full tracker sweep with numba on and off.

Each backend runs in its own subprocess because the switch is read at import
time.  Usage::

    python3 benchmarks/bench_kernels.py [--seeds 20] [--repeat 3]

The first numba run also pays JIT compilation (cached on disk afterwards);
it is reported separately as the warm-up time.
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time


def _best(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def worker(seeds: int, repeat: int) -> dict:
    start = time.perf_counter()
    import numpy as np

    from phystrack import _kernels, backend_name
    from phystrack.experiments import sweep
    from phystrack.simulator import builtin_scenarios

    rng = np.random.default_rng(0)
    g = np.array([0.0, -9.81, 0.0])
    lo = np.zeros(3)
    hi = np.array([6.096, 6.096, 12.192])
    p0 = np.array([1.0, 1.2, 2.0])
    v0 = np.array([2.5, -9.0, 14.0])
    a = rng.normal(size=(50, 3))
    b = rng.normal(size=(50, 3))
    chol = np.linalg.cholesky(np.cov(b, rowvar=False))
    mean = b.mean(axis=0)
    m9 = np.zeros(9)
    c9 = np.eye(9)
    z = np.ones(3)

    # Touch every kernel once so compilation is not timed below.
    _kernels.propagate(p0, v0, 1 / 60, g, lo, hi, 0.95, 16)
    _kernels.kf_update(*_kernels.kf_predict(m9, c9, 1 / 60, 50.0), z, 1e-4)
    _kernels.mahalanobis_norms(a, mean, chol)
    _kernels.displacement_norms(a, b)
    warmup = time.perf_counter() - start

    n = 2000

    def propagate_loop():
        for _ in range(n):
            _kernels.propagate(p0, v0, 0.5, g, lo, hi, 0.95, 16)

    def kf_loop():
        m, c = m9, c9
        for _ in range(n):
            m, c = _kernels.kf_predict(m, c, 1 / 60, 50.0)
            m, c = _kernels.kf_update(m, c, z, 1e-4)

    def metric_loop():
        for _ in range(n):
            _kernels.mahalanobis_norms(a, mean, chol)
            _kernels.displacement_norms(a, b)

    specs = builtin_scenarios()

    def sweep_all():
        for spec in specs:
            sweep(spec, range(seeds))

    return {
        "backend": backend_name(),
        "warmup_s": warmup,
        f"propagate_x{n}_s": _best(propagate_loop, repeat),
        f"kf_step_x{n}_s": _best(kf_loop, repeat),
        f"metrics_x{n}_s": _best(metric_loop, repeat),
        f"sweep_5x{seeds}_seeds_s": _best(sweep_all, max(1, repeat // 2)),
    }


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seeds", type=int, default=20)
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args()
    if args.worker:
        print(json.dumps(worker(args.seeds, args.repeat)))
        return
    results = []
    for disable in ("0", "1"):
        env = dict(os.environ, PHYSTRACK_DISABLE_NUMBA=disable)
        out = subprocess.run(
            [sys.executable, __file__, "--worker", "--seeds", str(args.seeds), "--repeat", str(args.repeat)],
            env=env,
            check=True,
            capture_output=True,
            text=True,
        )
        results.append(json.loads(out.stdout.strip().splitlines()[-1]))
    keys = [k for k in results[0] if k != "backend"]
    print(f"{'measurement':<28}" + "".join(f"{r['backend']:>12}" for r in results) + f"{'speedup':>10}")
    for k in keys:
        ratio = results[1][k] / results[0][k] if results[0][k] > 0 else float("nan")
        print(f"{k:<28}" + "".join(f"{r[k]:>12.4f}" for r in results) + f"{ratio:>10.2f}")


if __name__ == "__main__":
    main()
