"""Benchmark the numba kernels against their numpy fallbacks.

Run:  python3 benchmarks/bench_kernels.py [--repeats 5]

Workloads mirror an 800x600 stitch at the default 40-cell mesh. The
package selects the numba path automatically when numba is installed;
set LINESTITCH_DISABLE_NUMBA=1 to force the numpy path in production.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from linestitch import kernels_numpy
from linestitch.accel import HAVE_NUMBA
from linestitch.rng import CounterStream


def timeit(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def workloads():
    stream = CounterStream(20240917)

    n_rows, n_cells = 300, 2120  # 120 points + 30 lines, 40x53 mesh
    C = stream.uniform(n_rows * 9, -1, 1).reshape(n_rows, 9)
    w = stream.uniform(n_cells * n_rows, 0.01, 1.0).reshape(n_cells, n_rows)
    yield "weighted_nullvec_batch", lambda mod: mod.weighted_nullvec_batch(C, w)

    centers = stream.uniform(2 * n_cells, 0, 800).reshape(n_cells, 2)
    segs = stream.uniform(4 * 120, 0, 800).reshape(120, 4)
    yield "segment_distance_matrix", lambda mod: mod.point_segment_distance_matrix(centers, segs)

    rows, cols = 40, 53
    src_xs = np.linspace(0.0, 799.0, cols + 1)
    src_ys = np.linspace(0.0, 599.0, rows + 1)
    gx, gy = np.meshgrid(src_xs, src_ys)
    jitter = stream.normal((rows + 1) * (cols + 1) * 2, 2.0).reshape(2, rows + 1, cols + 1)
    vx = np.ascontiguousarray(gx + jitter[0] + 40.0)
    vy = np.ascontiguousarray(gy + jitter[1] + 25.0)
    img = stream.uniform(600 * 800 * 3, 0, 255).reshape(600, 800, 3)
    order = np.arange(rows * cols)
    yield "warp_mesh_bilinear", lambda mod: mod.warp_mesh_bilinear(
        img, vx, vy, src_xs, src_ys, 660, 890, order)

    n_q = rows * cols
    quads = np.empty((n_q, 4, 2))
    Hp_inv = np.empty((n_q, 3, 3))
    Tp_inv = np.empty((n_q, 3, 3))
    rects = np.empty((n_q, 4))
    cw, ch = 799.0 / cols, 599.0 / rows
    shifts = stream.uniform(2 * n_q, -3, 3).reshape(n_q, 2)
    for i in range(n_q):
        r, c = divmod(i, cols)
        x0, y0 = c * cw, r * ch
        rects[i] = (x0, y0, x0 + cw, y0 + ch)
        T = np.eye(3)
        T[0, 2], T[1, 2] = shifts[i]
        quads[i] = np.array([[x0, y0], [x0 + cw, y0], [x0 + cw, y0 + ch], [x0, y0 + ch]])
        quads[i] += shifts[i]
        Hp_inv[i] = np.linalg.inv(T)
        Tp_inv[i] = np.linalg.inv(T)
    yield "warp_cells_homography", lambda mod: mod.warp_cells_homography(
        img, quads, Hp_inv, Tp_inv, rects, 660, 890, 0.5)

    a = stream.uniform(600 * 800, 0, 255).reshape(600, 800)
    b = stream.uniform(600 * 800, 0, 255).reshape(600, 800)
    yield "ncc_map", lambda mod: mod.ncc_map(a, b)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    mods = {"numpy": kernels_numpy}
    if HAVE_NUMBA:
        from linestitch import kernels_numba
        mods["numba"] = kernels_numba
    else:
        print("numba not installed; benchmarking the numpy path only\n")

    print(f"{'kernel':26} " + " ".join(f"{name:>12}" for name in mods) +
          ("   speedup" if len(mods) == 2 else ""))
    for name, call in workloads():
        times = {}
        for mod_name, mod in mods.items():
            call(mod)  # warm-up (and jit compile)
            times[mod_name] = timeit(lambda: call(mod), args.repeats)
        line = f"{name:26} " + " ".join(f"{times[m] * 1e3:>10.1f}ms" for m in mods)
        if len(times) == 2:
            line += f"   {times['numpy'] / times['numba']:>6.2f}x"
        print(line)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
