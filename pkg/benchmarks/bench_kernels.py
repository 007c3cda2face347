"""Time the numba and numpy integration kernels per sample.

    python benchmarks/bench_kernels.py --N 6 --points 65536

Both paths see the same scrambled Faure points and all seven metrics.  The
numba timing excludes compilation (one warm-up call).  Run with
``SEPVOL_DISABLE_NUMBA=1`` to time the numpy path alone.
"""
import argparse
import time

import numpy as np

from sepvol import kernels, metrics, param, septest
from sepvol.lds import SequenceSpec, make_sequence


def bench(N, n, points, repeats, use_numba, angle_map="haar"):
    D = param.stratum_dim(N, n)
    pts = make_sequence(SequenceSpec(D, seed=1)).seek(1).points(points)
    codes = np.array([m.code for m in metrics.ALL_METRICS], dtype=np.int64)
    flagged = np.array([m.divergent_volume for m in metrics.ALL_METRICS])
    ranges = param.angle_ranges(N, n, angle_map)
    s_a, s_b = septest.block_size(N, "A"), septest.block_size(N, "B")

    def once(p):
        arr = kernels.new_arrays(len(codes))
        kernels.accumulate_points(p, N, n, ranges, angle_map == "haar", s_a, s_b, codes,
                                  flagged, 0.0, metrics.DEFAULT_FLOOR, *arr,
                                  use_numba=use_numba)
        return arr

    once(pts[:16])
    best = float("inf")
    for _ in range(repeats):
        t = time.perf_counter()
        once(pts)
        best = min(best, time.perf_counter() - t)
    return best / points * 1e6


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, default=6)
    ap.add_argument("--n", type=int, default=0)
    ap.add_argument("--points", type=int, default=65536)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()
    paths = [("numpy", False)]
    if kernels.HAVE_NUMBA:
        paths.insert(0, ("numba", True))
    res = {}
    for name, flag in paths:
        res[name] = bench(args.N, args.n, args.points, args.repeats, flag)
        print(f"{name:6s} N={args.N} n={args.n}: {res[name]:8.3f} us/sample "
              f"({1e6 / res[name]:,.0f} samples/s)")
    if len(res) == 2:
        print(f"numba speedup: {res['numpy'] / res['numba']:.1f}x")


if __name__ == "__main__":
    main()
