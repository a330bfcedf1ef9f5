"""Compare the numba and numpy kernel paths on the hot loops.

Run:  python3 benchmarks/bench_kernels.py [rows]
"""

from __future__ import annotations

import sys
import time

import numpy as np

from drilldown import _kernels_numpy

try:
    from drilldown import _kernels_numba

    BACKENDS = [("numba", _kernels_numba), ("numpy", _kernels_numpy)]
except ImportError:
    BACKENDS = [("numpy", _kernels_numpy)]


def bench(fn, *args, repeat: int = 5) -> float:
    fn(*args)  # warm-up (and JIT compile)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    rows = int(sys.argv[1]) if len(sys.argv) > 1 else 200_000
    rng = np.random.default_rng(7)
    ncols, nvals, ncands = 8, 12, 400
    codes = rng.integers(0, nvals, size=(rows, ncols)).astype(np.int32)
    row_w = np.ones(rows)
    topw = rng.uniform(0, 2, size=rows)
    cands = np.full((ncands, ncols), -1, dtype=np.int32)
    for i in range(ncands):
        for c in rng.choice(ncols, size=rng.integers(1, 4), replace=False):
            cands[i, c] = rng.integers(0, nvals)
    cand_w = rng.uniform(1, 4, size=ncands)

    filters = cands[:32].copy()
    caps = np.full(32, 2000, dtype=np.int64)

    print(f"{rows} rows x {ncols} cols, {ncands} candidates, 32 reservoirs")
    print(f"{'backend':8} {'count_marginals':>16} {'sample_pool_pass':>17}")
    for name, impl in BACKENDS:
        t_count = bench(impl.count_marginals, codes, row_w, topw, cands, cand_w)
        t_pool = bench(impl.sample_pool_pass, codes, filters, caps, 42)
        print(f"{name:8} {t_count:>14.3f}s {t_pool:>15.3f}s")


if __name__ == "__main__":
    main()
