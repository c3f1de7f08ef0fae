"""Benchmark the numba-compiled kernels against the numpy fallbacks.

Runs every hot kernel on detector-scale inputs (hundreds of predictions,
tens of ground truths) and prints per-call timings for both paths. The
JIT path is compiled explicitly here, so the STABLE_MATCH_NO_NUMBA flag
does not affect this script beyond the warning it prints.

Usage: python benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np

from stablematch import _kernels as K

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False
    print("numba not available: only the numpy path is timed")


def random_boxes(rng, n, scale=1.0):
    x0 = rng.uniform(0, scale, n)
    y0 = rng.uniform(0, scale, n)
    w = rng.uniform(0.01, 0.4 * scale, n)
    h = rng.uniform(0.01, 0.4 * scale, n)
    return np.stack([x0, y0, x0 + w, y0 + h], axis=1)


def timeit(fn, *args, repeats=20):
    fn(*args)  # warm-up / JIT compile
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    pred_boxes = random_boxes(rng, 900)
    gt_boxes = random_boxes(rng, 64)
    probs = rng.uniform(0, 1, 900)
    order = np.argsort(-probs, kind="stable").astype(np.int64)
    q = rng.uniform(0, 1, size=(900, 64))
    p_big = rng.uniform(0, 1, 1_000_000)
    t_big = rng.uniform(0, 1, 1_000_000)
    lap_cost = rng.normal(size=(200, 300))

    cases = [
        ("pairwise_iou 900x64", K._pairwise_iou_loops, K._pairwise_iou_numpy,
         (pred_boxes, gt_boxes)),
        ("pairwise_giou 900x64", K._pairwise_giou_loops, K._pairwise_giou_numpy,
         (pred_boxes, gt_boxes)),
        ("pairwise_l1 900x64", K._pairwise_l1_loops, K._pairwise_l1_numpy,
         (pred_boxes, gt_boxes)),
        ("nms 900 boxes thr=0.5", K._nms_suppress_loops, K._nms_suppress_numpy,
         (pred_boxes, order, 0.5)),
        ("positive_terms 1e6", K._positive_terms_loops, K._positive_terms_numpy,
         (p_big, t_big, 2.0)),
        ("negative_terms 1e6", K._negative_terms_loops, K._negative_terms_numpy,
         (p_big, 2.0)),
        ("cls_cost 900x64", K._cls_cost_values_loops, K._cls_cost_values_numpy,
         (q, 2.0)),
        ("lap 200x300", K._lap_min_cols_loops, K._lap_min_cols_loops, (lap_cost,)),
    ]

    print(f"{'kernel':28s} {'numpy':>12s} {'numba':>12s} {'speedup':>9s}")
    for name, loops_fn, numpy_fn, arguments in cases:
        t_numpy = timeit(numpy_fn, *arguments, repeats=args.repeats)
        if HAS_NUMBA:
            jitted = njit(cache=True)(loops_fn)
            t_numba = timeit(jitted, *arguments, repeats=args.repeats)
            print(
                f"{name:28s} {t_numpy * 1e3:10.3f}ms {t_numba * 1e3:10.3f}ms "
                f"{t_numpy / t_numba:8.1f}x"
            )
        else:
            print(f"{name:28s} {t_numpy * 1e3:10.3f}ms {'-':>12s} {'-':>9s}")


if __name__ == "__main__":
    main()
