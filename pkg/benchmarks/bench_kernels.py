"""Time the compiled and pure-Python kernel backends side by side.

Each backend runs in its own interpreter because the backend is chosen at
import time from ``STOCHWAVE_BACKEND``.

    python benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, timeit
import numpy as np
from stochwave import kernels
from stochwave.montecarlo import RunConfig, run_ensemble

rng = np.random.default_rng(0)
n, m, bw = 400, 64, 2
ab = np.full((bw + 1, n), -1.0); ab[-1] = 4.0  # upper storage, diagonal last
rb = kernels.band_cholesky(ab)
x = rng.standard_normal((n, m))
a, b = rng.standard_normal((2, n, m))
basis = rng.standard_normal((n, 100))
db = rng.standard_normal((100, m))
cfg = RunConfig("pade2", space="cfd", f="cubic", g="sin", dt=0.05, T=2.0, M=40)
repeat = int(sys.argv[1])
cases = {
    "sym_band_matvec": lambda: kernels.sym_band_matvec(ab, x),
    "band_cho_solve": lambda: kernels.band_cho_solve(rb, x),
    "discrete_gradient": lambda: kernels.discrete_gradient(2, a, b),
    "column_sum": lambda: kernels.column_sum(x),
    "matmul": lambda: kernels.matmul(basis, db),
    "ensemble (64 paths)": lambda: run_ensemble(cfg, 64, seed=0),
}
out = {"backend": kernels.BACKEND}
for name, fn in cases.items():
    number = 1 if name.startswith("ensemble") else 20
    out[name] = min(timeit.repeat(fn, number=number, repeat=repeat)) / number
print(json.dumps(out))
"""


def measure(backend, repeat):
    env = dict(os.environ, STOCHWAVE_BACKEND=backend)
    proc = subprocess.run([sys.executable, "-c", WORKER, str(repeat)], env=env,
                          capture_output=True, text=True)
    if proc.returncode:
        return None, proc.stderr.strip().splitlines()[-1]
    return json.loads(proc.stdout), None


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    compiled, err = measure("compiled", args.repeat)
    python, _ = measure("python", args.repeat)
    if compiled is None:
        print(f"compiled backend unavailable ({err}); showing the python backend only")
    print(f"{'kernel':<22}{'compiled [ms]':>15}{'python [ms]':>15}{'speedup':>10}")
    for name in python:
        if name == "backend":
            continue
        p = python[name] * 1e3
        if compiled is None:
            print(f"{name:<22}{'-':>15}{p:>15.3f}{'-':>10}")
        else:
            c = compiled[name] * 1e3
            print(f"{name:<22}{c:>15.3f}{p:>15.3f}{p / c:>9.1f}x")


if __name__ == "__main__":
    main()
