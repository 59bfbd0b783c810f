#!/usr/bin/env python3
"""Benchmark the compiled event kernels against the numpy fallback.

Times the two hot kernels on synthetic workloads shaped like the crossing
scenario (per-frame event sets of a few thousand assignments over a few
dozen measurements), then a full tracking run per backend.

Run:  python benchmarks/bench_kernels.py
"""

import subprocess
import sys
import time

import numpy as np

from ggiwtrack._kernels import _fallback

try:
    from ggiwtrack._kernels import _native
except ImportError:
    _native = None


def time_call(fn, *args, repeat=30):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernels():
    rng = np.random.default_rng(0)
    print(f"{'kernel':<28}{'size':<22}{'python':>10}{'native':>10}{'speedup':>9}")
    for n_events, m, n_targets in ((512, 12, 2), (4096, 45, 2), (16384, 45, 3)):
        assign = rng.integers(0, n_targets + 1, size=(n_events, m)).astype(np.int32)
        points = np.ascontiguousarray(rng.normal(scale=5.0, size=(m, 2)))
        loglik = np.ascontiguousarray(rng.normal(size=(n_targets, m)))
        size = f"{n_events}x{m} (n={n_targets})"
        for name, args in (("assignment_loglik_sums", (assign, loglik)),
                           ("event_stats", (assign, points, n_targets))):
            t_py = time_call(getattr(_fallback, name), *args)
            if _native is None:
                print(f"{name:<28}{size:<22}{t_py * 1e3:>8.2f}ms{'-':>10}{'-':>9}")
            else:
                t_nat = time_call(getattr(_native, name), *args)
                print(f"{name:<28}{size:<22}{t_py * 1e3:>8.2f}ms"
                      f"{t_nat * 1e3:>8.2f}ms{t_py / t_nat:>8.1f}x")


TRACK_SNIPPET = """
import time
from ggiwtrack._kernels import BACKEND
from ggiwtrack.simulate import crossing_scenario
from ggiwtrack.tracker import TrackerConfig, track_run
scenario = crossing_scenario(lambda_c=25.0, lambda_t=20.0, seed=0, duration_steps=30)
config = TrackerConfig(scheme="cluster_pruned", event_cap=4096)
t0 = time.perf_counter()
track_run(scenario, config, run=0)
print(f"{BACKEND}: {time.perf_counter() - t0:.2f} s")
"""


def bench_tracking():
    print("\nhalf-length crossing-scenario run per backend:")
    for backend in ("native", "python"):
        if backend == "native" and _native is None:
            print("native: extension not built, skipped")
            continue
        out = subprocess.run(
            [sys.executable, "-c", TRACK_SNIPPET],
            capture_output=True, text=True,
            env={"GGIWTRACK_BACKEND": backend, "PATH": "/usr/bin:/bin"})
        print(out.stdout.strip() or out.stderr.strip())


if __name__ == "__main__":
    bench_kernels()
    bench_tracking()
