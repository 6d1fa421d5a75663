"""Compare the compiled and pure-Python Jacobi sweep kernels.

    python benchmarks/bench_jacobi.py [--sizes 8,16,28,48] [--repeats 5]

Both kernels run on the same random symmetric matrices. The script
checks that their outputs agree bit for bit and prints the median time
per decomposition and the speedup.
"""

import argparse
import statistics
import sys
import time

import numpy as np

from corrtensor.linalg import _jacobi_py

try:
    from corrtensor.linalg import _jacobi
except ImportError:
    _jacobi = None


def time_kernel(mod, a0, repeats):
    threshold = 1e-12 * np.linalg.norm(a0)
    times = []
    for _ in range(repeats):
        a, v = a0.copy(), np.eye(a0.shape[0])
        t0 = time.perf_counter()
        sweeps = mod.jacobi_sweeps(a, v, threshold, 100)
        times.append(time.perf_counter() - t0)
    return statistics.median(times), sweeps, a, v


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="8,16,28,48")
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if _jacobi is None:
        print("compiled kernel not built; run `pip install -e . --no-build-isolation` first", file=sys.stderr)
        return 1
    rng = np.random.default_rng(args.seed)
    print(f"{'n':>4} {'sweeps':>6} {'cython_ms':>10} {'python_ms':>10} {'speedup':>8} identical")
    for n in (int(s) for s in args.sizes.split(",")):
        g = rng.normal(size=(n, n))
        a0 = g + g.T
        tc, sc, ac, vc = time_kernel(_jacobi, a0, args.repeats)
        tp, sp, ap_, vp = time_kernel(_jacobi_py, a0, args.repeats)
        same = sc == sp and ac.tobytes() == ap_.tobytes() and vc.tobytes() == vp.tobytes()
        print(f"{n:>4} {sc:>6} {tc * 1e3:>10.3f} {tp * 1e3:>10.3f} {tp / tc:>8.1f} {same}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
