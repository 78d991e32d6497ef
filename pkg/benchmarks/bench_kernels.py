"""Compare the compiled and pure-Python profile integrators.

Each workload is one full shot from the series start to the first zero (or to
the integration end), the unit of work inside the eigenvalue root search.

    python3 benchmarks/bench_kernels.py --repeat 5
"""
import argparse
import json
import math
import statistics
import sys
import time

import numpy as np

from hardycone import _kernels
from hardycone.cone_profile import N_SAMPLES, series_start
from hardycone.params import ProblemParams

# (N, p, lam, t_end, sampled)
WORKLOADS = [
    (2, 2.0, 0.75, math.pi - 1e-8, False),
    (3, 2.0, 1.0, math.pi - 1e-8, False),
    (2, 3.0, 0.6, math.pi - 1e-8, False),
    (5, 4.0, 1.3, math.pi - 1e-8, False),
    (3, 1.5, 1.2, math.pi - 1e-8, True),
]


def run_shot(backend, N, p, lam, t_end, sampled, tol):
    params = ProblemParams(N, p, 0.0, tol)
    t0, w0, dw0 = series_start(lam, params)
    samples = np.linspace(0.0, t_end, N_SAMPLES) if sampled else None
    return _kernels.integrate_profile(lam, N, p, t0, w0, dw0, t_end, tol / 10, tol / 10,
                                      stop_at_zero=True, samples=samples, backend=backend)


def time_shot(backend, work, tol, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        tr = run_shot(backend, *work, tol)
        times.append(time.perf_counter() - t)
    return statistics.median(times), tr


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--tol", type=float, default=1e-9)
    ap.add_argument("--json", action="store_true", help="one JSON record per workload")
    args = ap.parse_args(argv)

    backends = _kernels.available_backends()
    if "cython" not in backends:
        print("compiled kernel not built; only the Python backend is available",
              file=sys.stderr)
    rows = []
    for work in WORKLOADS:
        row = {"N": work[0], "p": work[1], "lambda": work[2], "sampled": work[4]}
        ref = None
        for name in backends:
            sec, tr = time_shot(name, work, args.tol, args.repeat)
            row[f"{name}_s"] = sec
            row["steps"] = tr.steps
            if ref is None:
                ref = tr
            else:
                row["max_diff"] = max(abs(tr.t - ref.t), abs(tr.w - ref.w))
        if "cython_s" in row:
            row["speedup"] = row["python_s"] / row["cython_s"]
        rows.append(row)

    if args.json:
        for row in rows:
            print(json.dumps(row, sort_keys=True))
        return 0
    print(f"{'N':>2} {'p':>4} {'lambda':>6} {'steps':>6} {'python ms':>10} "
          f"{'cython ms':>10} {'speedup':>8} {'max diff':>9}")
    for r in rows:
        cy = f"{1e3 * r['cython_s']:10.3f}" if "cython_s" in r else f"{'-':>10}"
        sp = f"{r['speedup']:8.1f}" if "speedup" in r else f"{'-':>8}"
        md = f"{r['max_diff']:9.1e}" if "max_diff" in r else f"{'-':>9}"
        print(f"{r['N']:>2} {r['p']:>4g} {r['lambda']:>6g} {r['steps']:>6} "
              f"{1e3 * r['python_s']:10.3f} {cy} {sp} {md}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
