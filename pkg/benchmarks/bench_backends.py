"""Time the numba and pure-numpy kernel backends against each other.

The backend is fixed at import time, so each one is measured in its own
interpreter (``OAVC_DISABLE_NUMBA=1`` selects numpy). Reported times are
the best of several repeats after a warm-up call, so numba compilation is
not counted.

    python3 benchmarks/bench_backends.py [--repeats 5] [--blocks 200]
"""

import argparse
import json
import os
import subprocess
import sys
import time

WORKER = r"""
import json, sys, time
import numpy as np
from oavc_coverage import BACKEND, kernels, normal_polygon
from oavc_coverage.cli import parse_scenario, resolve_scenario_path
from oavc_coverage.engine import run
from oavc_coverage.quadrature import triangle_rule

repeats, blocks = int(sys.argv[1]), int(sys.argv[2])
sc = parse_scenario(resolve_scenario_path("paper_s5"))
mix = sc.final_mixture
rng = np.random.default_rng(0)
pos = rng.uniform(-19, 19, (10, 2))
centers = np.array([o.center for o in sc.obstacles])
radii = np.array([o.radius for o in sc.obstacles])
keep = np.all(np.linalg.norm(pos[:, None] - centers[None], axis=2) > radii + 0.1, axis=1)
pos = np.ascontiguousarray(pos[keep])
rect = sc.domain.as_array()
cells = [kernels.build_cell(i, pos, centers, radii, rect) for i in range(len(pos))]
flat = np.ascontiguousarray(np.vstack(cells))
offsets = np.r_[0, np.cumsum([len(c) for c in cells])].astype(np.int64)
bary, w = triangle_rule(8)
grid = np.ascontiguousarray(rng.uniform(-20, 20, (40000, 2)))

cases = {
    "build_cells": lambda: [kernels.build_cell(i, pos, centers, radii, rect) for i in range(len(pos))],
    "mixture_pdf_40k": lambda: kernels.mixture_pdf(grid, *mix.kernel_params()),
    "cubature_moments": lambda: kernels.cells_moments(flat, offsets, pos, bary, w, *mix.kernel_params()),
    "analytic_moments": lambda: normal_polygon.mixture_rows(flat, offsets, pos, mix.means, mix.cholesky(), mix.weights),
    f"engine_{blocks}_blocks": lambda: run(sc, max_steps=blocks),
}
result = {"backend": BACKEND}
for name, fn in cases.items():
    fn()
    times = []
    for _ in range(repeats if not name.startswith("engine") else 1):
        t = time.perf_counter(); fn(); times.append(time.perf_counter() - t)
    result[name] = min(times)
print(json.dumps(result))
"""


def measure(disable_numba, repeats, blocks):
    env = dict(os.environ)
    env.pop("OAVC_DISABLE_NUMBA", None)
    if disable_numba:
        env["OAVC_DISABLE_NUMBA"] = "1"
    proc = subprocess.run(
        [sys.executable, "-c", WORKER, str(repeats), str(blocks)],
        env=env, capture_output=True, text=True, check=True,
    )
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main():
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--blocks", type=int, default=200)
    args = parser.parse_args()
    start = time.perf_counter()
    fast = measure(False, args.repeats, args.blocks)
    slow = measure(True, args.repeats, args.blocks)
    names = [k for k in fast if k != "backend"]
    width = max(len(n) for n in names)
    print(f"{'kernel':<{width}}  {fast['backend']:>10}  {slow['backend']:>10}  speedup")
    for name in names:
        print(f"{name:<{width}}  {fast[name] * 1e3:>8.2f}ms  {slow[name] * 1e3:>8.2f}ms  {slow[name] / fast[name]:>6.1f}x")
    print(f"(total wall time {time.perf_counter() - start:.1f}s)")


if __name__ == "__main__":
    main()
