"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeats 5]

Both variants are imported side by side, so no env flag is needed here;
``DGMLEARN_DISABLE_NUMBA=1`` only changes which one the library dispatches to.
"""

import argparse
import time

import numpy as np

from dgmlearn import kernels
from dgmlearn.gaifman import build_gaifman_graph
from dgmlearn.synthetic import planted_ddi_kb


def best_of(fn, repeats):
    fn()  # warm-up / compile
    best = float("inf")
    for _ in range(repeats):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def cases(rng):
    g = build_gaifman_graph(planted_ddi_kb(n_drugs=400, n_enzymes=60, n_transporters=60, n_pos=800,
                                           noise_facts=600))
    sources = rng.integers(0, len(g.names), 200)
    bound = rng.integers(0, 2000, size=(200_000, 3)).astype(np.int64)
    mask = rng.random(2000) < 0.3
    X = rng.integers(0, 20, size=(5000, 30)).astype(np.float64)
    grad, hess = rng.normal(size=5000), rng.uniform(0.05, 0.25, 5000)
    rows = np.arange(5000, dtype=np.int64)
    return {
        "bfs_depths (200 sources, r=2)": (
            lambda: [kernels.bfs_depths_nb(g.indptr, g.indices, int(s), 2) for s in sources],
            lambda: [kernels.bfs_depths_np(g.indptr, g.indices, int(s), 2) for s in sources]),
        "count_inside (200k x 3)": (
            lambda: kernels.count_inside_nb(bound, mask),
            lambda: kernels.count_inside_np(bound, mask)),
        "best_split (5000 x 30)": (
            lambda: kernels.best_split_nb(X, grad, hess, rows, 1.0, 1e-3),
            lambda: kernels.best_split_np(X, grad, hess, rows, 1.0, 1e-3)),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':32s} {'numba s':>10s} {'numpy s':>10s} {'speedup':>8s}")
    for name, (nb, npf) in cases(rng).items():
        a, b = best_of(nb, args.repeats), best_of(npf, args.repeats)
        print(f"{name:32s} {a:10.5f} {b:10.5f} {b / a:8.1f}x")


if __name__ == "__main__":
    main()
