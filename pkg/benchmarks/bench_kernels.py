"""Compare the numba and numpy kernel backends.

Kernel timings call both variants directly on a 7,776-branch workload.  The
end-to-end numbers run one planning scenario in a subprocess per backend,
since the backend is chosen by RULEHIER_NUMBA at import time.

    python3 benchmarks/bench_kernels.py [--repeat 20] [--scenario overtake-from-lane]
"""

import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from rulehier import kernels
from rulehier._accel import HAVE_NUMBA
from rulehier.planner import DEFAULT_ACTIONS, primitive_controls


def kernel_workload():
    ctrl = primitive_controls(DEFAULT_ACTIONS, 2, 10)
    x0 = np.array([0.0, 0.0, 0.0, 10.0])
    states = kernels.rollout_batch_numpy(x0, ctrl, 0.2, 1.5, 1.5, 5.0, np.pi / 8, True)
    px = np.ascontiguousarray(states[:, :, 0].T)
    py = np.ascontiguousarray(states[:, :, 1].T)
    n = px.shape[0]
    track = (np.linspace(20, 20, n), np.zeros(n), np.zeros(n))
    return {
        "rollout_batch": lambda v: getattr(kernels, f"rollout_batch_{v}")(x0, ctrl, 0.2, 1.5, 1.5, 5.0, np.pi / 8, True),
        "smooth_reduce": lambda v: getattr(kernels, f"smooth_reduce_{v}")(px, 0.05, False),
        "box_separation": lambda v: getattr(kernels, f"box_separation_{v}")(px, py, *track, 5.0, 2.0),
    }


def bench_kernels(repeat):
    rows = []
    for name, fn in kernel_workload().items():
        row = {"kernel": name}
        for variant in ("numpy", "numba") if HAVE_NUMBA else ("numpy",):
            fn(variant)  # compile / warm caches
            t = min(timeit.repeat(lambda: fn(variant), number=1, repeat=repeat))
            row[variant] = t
        rows.append(row)
    return rows


SCENARIO_SNIPPET = """
import json, sys
from rulehier import sim
r = sim.run_scenario(sys.argv[1], cycles=int(sys.argv[2]))
print(json.dumps({"backend": r.summary["kernel_backend"], **r.summary["timing"]}))
"""


def bench_scenario(name, cycles):
    out = {}
    for flag in ("0", "1") if HAVE_NUMBA else ("0",):
        env = dict(os.environ, RULEHIER_NUMBA=flag)
        proc = subprocess.run(
            [sys.executable, "-c", SCENARIO_SNIPPET, name, str(cycles)],
            env=env, capture_output=True, text=True, check=True,
        )
        res = json.loads(proc.stdout.strip().splitlines()[-1])
        out[res["backend"]] = res
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--scenario", default="overtake-from-lane")
    ap.add_argument("--cycles", type=int, default=20)
    args = ap.parse_args()

    print(f"{'kernel':<16} {'numpy (ms)':>11} {'numba (ms)':>11} {'speedup':>8}")
    for r in bench_kernels(args.repeat):
        nb = r.get("numba")
        speed = f"{r['numpy'] / nb:8.1f}" if nb else "     n/a"
        nb_s = f"{nb * 1e3:11.3f}" if nb else "        n/a"
        print(f"{r['kernel']:<16} {r['numpy'] * 1e3:11.3f} {nb_s} {speed}")

    print(f"\nclosed loop, {args.scenario}, {args.cycles} cycles (seconds per cycle)")
    for backend, st in bench_scenario(args.scenario, args.cycles).items():
        print(f"{backend:<8} mean {st['mean']:.3f}  std {st['std']:.3f}  median {st['median']:.3f}  max {st['max']:.3f}")


if __name__ == "__main__":
    main()
