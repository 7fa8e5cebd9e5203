"""Compare the numba and numpy kernel backends on recurjac and fastlip.

Each backend runs in its own interpreter because the backend is chosen at
import time from JACOBOUND_DISABLE_NUMBA.

    python benchmarks/bench_kernels.py [--repeats 5] [--quick]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from jacobound import BACKEND, Ball, fastlip, layer_intervals, recurjac_backward
from jacobound.random_nets import random_network

cfg = json.loads(sys.argv[1])
out = []
for widths, radius in cfg["cases"]:
    net = random_network(widths, seed=1)
    li = layer_intervals(net, Ball(np.random.default_rng(0).uniform(-1, 1, widths[0]), radius))
    row = {"widths": widths, "radius": radius, "unstable": li.n_unstable}
    for name, fn in (("recurjac-b", recurjac_backward), ("fastlip", fastlip)):
        fn(net, li)  # compile / warm caches
        times = []
        for _ in range(cfg["repeats"]):
            t = time.perf_counter()
            fn(net, li)
            times.append(time.perf_counter() - t)
        row[name] = float(np.median(times))
    out.append(row)
print(json.dumps({"backend": BACKEND, "rows": out}))
"""


def run_backend(disable: bool, cfg: dict) -> dict:
    env = dict(os.environ, JACOBOUND_DISABLE_NUMBA="1" if disable else "0")
    proc = subprocess.run([sys.executable, "-c", WORKER, json.dumps(cfg)], env=env, capture_output=True, text=True, check=True)
    return json.loads(proc.stdout)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--quick", action="store_true", help="smaller networks only")
    args = ap.parse_args()
    cases = [([16, 32, 32, 32, 1], 1e-2), ([64] * 7 + [1], 1e-2), ([64] * 7 + [10], 1e-2)]
    if not args.quick:
        cases += [([64] * 7 + [10], 1.0), ([32] * 5 + [10], 1e-3)]
    cfg = {"cases": cases, "repeats": args.repeats}
    fast, slow = run_backend(False, cfg), run_backend(True, cfg)
    if fast["backend"] != "numba":
        print("numba is not importable; both columns use the numpy backend")
    print(f"{'network':<22}{'R':>8}{'unst':>6}  {'method':<11}{'numba ms':>10}{'numpy ms':>10}{'speedup':>9}")
    for a, b in zip(fast["rows"], slow["rows"]):
        shape = "x".join(map(str, a["widths"]))
        shape = shape if len(shape) <= 20 else f"{a['widths'][0]}^{len(a['widths']) - 1}x{a['widths'][-1]}"
        for m in ("recurjac-b", "fastlip"):
            print(f"{shape:<22}{a['radius']:>8.0e}{a['unstable']:>6}  {m:<11}{a[m] * 1e3:>10.3f}{b[m] * 1e3:>10.3f}{b[m] / a[m]:>8.1f}x")


if __name__ == "__main__":
    main()
