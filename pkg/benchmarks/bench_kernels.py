"""Benchmark the compiled kernels against the numpy fallback.

Run: python3 benchmarks/bench_kernels.py
"""

import timeit

import numpy as np

from motrack.kernels import _fallback

try:
    from motrack.kernels import _native
except ImportError:
    _native = None


def random_boxes(rng, n):
    return np.column_stack(
        [rng.uniform(0, 1800, n), rng.uniform(0, 1000, n),
         rng.uniform(20, 200, n), rng.uniform(40, 300, n)]
    )


def bench(label, fn, number):
    t = timeit.timeit(fn, number=number) / number
    print(f"  {label:<10} {t * 1e3:9.3f} ms/call")
    return t


def main():
    rng = np.random.default_rng(0)

    print("iou_matrix (200 x 200 boxes)")
    a, b = random_boxes(rng, 200), random_boxes(rng, 200)
    t_np = bench("numpy", lambda: _fallback.iou_matrix(a, b), 200)
    if _native:
        t_nat = bench("native", lambda: _native.iou_matrix(a, b), 200)
        print(f"  speedup    {t_np / t_nat:9.2f}x")

    print("min_eig_response (720 x 1280 image)")
    img = rng.random((720, 1280))
    t_np = bench("numpy", lambda: _fallback.min_eig_response(img), 5)
    if _native:
        t_nat = bench("native", lambda: _native.min_eig_response(img), 5)
        print(f"  speedup    {t_np / t_nat:9.2f}x")

    print("lk_refine (500 points, 21x21 window)")
    prev = rng.random((720, 1280))
    for _ in range(2):
        prev = 0.25 * (
            np.roll(prev, 1, 0) + np.roll(prev, -1, 0)
            + np.roll(prev, 1, 1) + np.roll(prev, -1, 1)
        )
    cur = np.roll(prev, 3, axis=1)
    pts = np.column_stack([rng.uniform(30, 1250, 500), rng.uniform(30, 690, 500)])
    guess = np.zeros_like(pts)
    t_np = bench("numpy", lambda: _fallback.lk_refine(prev, cur, pts, guess), 3)
    if _native:
        t_nat = bench("native", lambda: _native.lk_refine(prev, cur, pts, guess), 3)
        print(f"  speedup    {t_np / t_nat:9.2f}x")

    if _native is None:
        print("\ncompiled extension not available; numpy fallback only")


if __name__ == "__main__":
    main()
