"""Compare the compiled and pure-Python kernel backends.

Micro-benchmarks call each kernel directly from both modules in one process.
The end-to-end benchmark plans a bundled scenario in two subprocesses, one
with ``KINOAURA_PURE_PYTHON=1``.

    python benchmarks/bench_kernels.py [--repeat 5] [--iterations 3000] [--csv out.csv]
"""
import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from kinoaura import _pykernels as py
from kinoaura.bench.csvio import write_csv

try:
    from kinoaura import _ckernels as cy
except ImportError:
    cy = None

_E2E = """
import json, time, numpy as np
from kinoaura import kernels
from kinoaura.bench.scenario import load_scenario
from kinoaura.core import CostFunction
from kinoaura.planner import Budget, PlannerConfig, plan
scen = load_scenario({scenario!r})
t0 = time.perf_counter()
plans, tree = plan(PlannerConfig(), scen.build_model(), scen.environment, CostFunction.PATH_LENGTH, scen.start,
                   Budget(iterations={iterations}), rng=np.random.default_rng(0))
print(json.dumps({{"backend": kernels.BACKEND, "seconds": time.perf_counter() - t0, "nodes": len(tree)}}))
"""


def _cases(rng):
    X = np.column_stack([rng.uniform(-5, 5, 256), rng.uniform(-5, 5, 256), rng.uniform(-3, 3, 256)])
    U = np.column_stack([rng.uniform(-1, 1, 256), rng.uniform(-1, 1, 256)])
    n = 2000
    P = rng.uniform(-5, 5, (n, 3))
    ids = np.arange(n, dtype=np.int64)
    alive = np.ones(n, dtype=bool)
    w = np.array([1.0, 1.0, 0.5])
    ang = np.array([False, False, True])
    vals = rng.uniform(0, 10, n)
    q = np.zeros(3)
    ws_lo, ws_hi = np.array([-6.0, -6.0]), np.array([6.0, 6.0])
    box_lo = rng.uniform(-5, 4, (8, 2))
    box_hi = box_lo + 0.5
    sph_c = rng.uniform(-5, 5, (4, 2))
    sph_r = np.full(4, 0.3)
    pts = rng.uniform(-6, 6, (512, 2))
    traj = np.column_stack([np.linspace(-5, 5, 21), np.linspace(-5, 5, 21), np.zeros(21)])
    pos = np.array([0, 1], dtype=np.int64)
    return {
        "car_propagate": lambda k: k.car_propagate(X[0], U[0], 0.5, 0.3),
        "car_propagate_batch[256]": lambda k: k.car_propagate_batch(X, U, 0.5, 0.3),
        "car_jacobian_batch[256]": lambda k: k.car_jacobian_batch(X, U, 0.5, 0.3),
        "nearest[2000]": lambda k: k.nearest(P, n, ids, alive, q, w, ang),
        "best_near[2000]": lambda k: k.best_near(P, n, ids, alive, vals, q, 1.0, w, ang),
        "points_free[512]": lambda k: k.points_free(pts, ws_lo, ws_hi, box_lo, box_hi, sph_c, sph_r),
        "segment_free[21]": lambda k: k.segment_free(traj, 0.05, w, ang, pos, ws_lo, ws_hi, box_lo, box_hi,
                                                      sph_c, sph_r),
    }


def _best_time(fn, repeat):
    number, _ = timeit.Timer(fn).autorange()
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def _e2e(pure: bool, scenario: str, iterations: int) -> dict:
    env = dict(os.environ)
    env.pop("KINOAURA_PURE_PYTHON", None)
    if pure:
        env["KINOAURA_PURE_PYTHON"] = "1"
    code = _E2E.format(scenario=scenario, iterations=iterations)
    out = subprocess.run([sys.executable, "-c", code], env=env, check=True, capture_output=True, text=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--iterations", type=int, default=3000, help="planner iterations for the end-to-end run")
    ap.add_argument("--scenario", default="narrow_passage_car")
    ap.add_argument("--csv", default=None, help="also write the table as CSV")
    args = ap.parse_args(argv)
    if cy is None:
        print("compiled extension not built; run `pip install -e . --no-build-isolation` first", file=sys.stderr)
        return 1
    rows = []
    for name, fn in _cases(np.random.default_rng(0)).items():
        tp = _best_time(lambda: fn(py), args.repeat)
        tc = _best_time(lambda: fn(cy), args.repeat)
        rows.append([name, tp * 1e6, tc * 1e6, tp / tc])
    rp = _e2e(True, args.scenario, args.iterations)
    rc = _e2e(False, args.scenario, args.iterations)
    rows.append([f"plan {args.scenario} {args.iterations}iter", rp["seconds"] * 1e6, rc["seconds"] * 1e6,
                 rp["seconds"] / rc["seconds"]])
    print(f"{'kernel':<40}{'python us':>14}{'cython us':>14}{'speedup':>10}")
    for name, a, b, s in rows:
        print(f"{name:<40}{a:>14.2f}{b:>14.2f}{s:>9.1f}x")
    if args.csv:
        write_csv(args.csv, ["kernel", "python_us", "cython_us", "speedup"], rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
