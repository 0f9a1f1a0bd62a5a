"""Compare the compiled graph-segmentation kernel against the pure-Python
fallback on kNN graphs of increasing size.

Usage: python3 benchmarks/bench_segmentation.py [--sizes 2000,10000,50000]
"""
import argparse
import time

import numpy as np

from lift3d._native import HAVE_COMPILED, fallback
from lift3d.scene import PointCloud
from lift3d.superpoints import build_knn_graph


def sorted_edge_args(n, rng):
    cloud = PointCloud(rng.random((n, 3)), rng.random((n, 3)))
    g = build_knn_graph(cloud, 16)
    order = np.lexsort((g.edges_b, g.edges_a, g.weights))
    return (n, np.ascontiguousarray(g.edges_a[order]),
            np.ascontiguousarray(g.edges_b[order]),
            np.ascontiguousarray(g.weights[order]), 0.5, 20)


def timeit(fn, args, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", default="2000,10000,50000")
    opts = ap.parse_args()
    sizes = [int(s) for s in opts.sizes.split(",")]

    rng = np.random.default_rng(0)
    print(f"compiled kernel available: {HAVE_COMPILED}")
    print(f"{'points':>8} {'python (s)':>12} {'compiled (s)':>12} {'speedup':>8}")
    for n in sizes:
        args = sorted_edge_args(n, rng)
        t_py, labels_py = timeit(fallback.segment_sorted_edges, args)
        if HAVE_COMPILED:
            from lift3d._native import _fhcore
            t_c, labels_c = timeit(_fhcore.segment_sorted_edges, args)
            assert (labels_py == labels_c).all(), "kernels disagree"
            print(f"{n:>8} {t_py:>12.4f} {t_c:>12.4f} {t_py / t_c:>7.1f}x")
        else:
            print(f"{n:>8} {t_py:>12.4f} {'-':>12} {'-':>8}")


if __name__ == "__main__":
    main()
