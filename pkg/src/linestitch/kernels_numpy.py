"""Vectorized numpy implementations of the hot kernels.

These are the fallback path when numba is unavailable or disabled; the
numba twins in kernels_numba.py compute the same quantities with
explicit loops. Keep the two files in sync — tests/test_kernels.py
checks parity.
"""

from __future__ import annotations

import numpy as np

_SVD_CHUNK = 256


def weighted_nullvec_batch(C: np.ndarray, row_weights: np.ndarray):
    """Smallest right singular vector of diag(w) @ C per weight row.

    C is (R, 9); row_weights is (n, R). Returns (h, sv) where h is
    (n, 9) and sv is (n, 3) holding singular values (s0, s7, s8) for
    rank/separation diagnostics. The minimal 8-row system needs the full
    decomposition to expose the null direction; its ninth singular value
    is an implicit zero.
    """
    n = row_weights.shape[0]
    minimal = C.shape[0] < 9
    h = np.empty((n, 9))
    sv = np.empty((n, 3))
    for lo in range(0, n, _SVD_CHUNK):
        hi = min(n, lo + _SVD_CHUNK)
        stack = row_weights[lo:hi, :, None] * C[None, :, :]
        _, s, vt = np.linalg.svd(stack, full_matrices=minimal)
        h[lo:hi] = vt[:, -1, :]
        sv[lo:hi, 0] = s[:, 0]
        sv[lo:hi, 1] = s[:, 7]
        sv[lo:hi, 2] = 0.0 if minimal else s[:, 8]
    return h, sv


def point_segment_distance_matrix(centers: np.ndarray, segments: np.ndarray) -> np.ndarray:
    """(n_centers, n_segments) distances from points to finite segments."""
    c = centers[:, None, :]                      # (n, 1, 2)
    p0 = segments[None, :, 0:2]                  # (1, k, 2)
    p1 = segments[None, :, 2:4]
    d = p1 - p0                                  # (1, k, 2)
    len2 = (d**2).sum(-1)
    len2 = np.where(len2 < 1e-18, 1.0, len2)
    t = ((c - p0) * d).sum(-1) / len2
    t = np.clip(t, 0.0, 1.0)
    proj = p0 + t[..., None] * d
    return np.sqrt(((c - proj) ** 2).sum(-1))


def _invert_bilinear_grid(px, py, q00, q10, q01, q11, eps=1e-7):
    """Solve the bilinear map for arrays of canvas points.

    Returns (s, t, ok). The map is p = q00 + s e + t f + s t g with
    e = q10-q00, f = q01-q00, g = q11-q10-q01+q00. t solves the
    quadratic from (h - t f) x (e + t g) = 0; both roots are tried and
    the one yielding (s, t) in the unit square (with eps slack, so
    shared quad edges never fall through the cracks) wins.
    """
    e = q10 - q00
    f = q01 - q00
    g = q11 - q10 - q01 + q00
    hx = px - q00[0]
    hy = py - q00[1]

    a2 = -(f[0] * g[1] - f[1] * g[0])          # scalar per quad
    a1 = (hx * g[1] - hy * g[0]) - (f[0] * e[1] - f[1] * e[0])
    a0 = hx * e[1] - hy * e[0]

    def s_for(t):
        denx = e[0] + t * g[0]
        deny = e[1] + t * g[1]
        use_x = np.abs(denx) >= np.abs(deny)
        denom = np.where(use_x, denx, deny)
        safe = np.abs(denom) > 1e-14
        numer = np.where(use_x, hx - t * f[0], hy - t * f[1])
        return np.where(safe, numer / np.where(safe, denom, 1.0), np.nan)

    def in_range(v):
        return np.isfinite(v) & (v >= -eps) & (v <= 1 + eps)

    if abs(a2) < 1e-12:
        lin = np.abs(a1) > 1e-14
        t = np.where(lin, -a0 / np.where(lin, a1, 1.0), np.nan)
        s = s_for(t)
        ok = in_range(s) & in_range(t)
    else:
        # stable quadratic: q = -(a1 + sign(a1) sqrt(disc)) / 2, roots q/a2
        # and a0/q -- avoids cancellation when a2 is tiny (near-rectangles)
        disc = a1 * a1 - 4.0 * a2 * a0
        valid = disc >= 0
        root = np.sqrt(np.where(valid, disc, 0.0))
        sign = np.where(a1 >= 0, 1.0, -1.0)
        q = -0.5 * (a1 + sign * root)
        t1 = np.where(valid, q / a2, np.nan)
        q_safe = np.abs(q) > 1e-300
        t2 = np.where(valid & q_safe, a0 / np.where(q_safe, q, 1.0), t1)
        s1 = s_for(t1)
        s2 = s_for(t2)
        ok1 = in_range(t1) & in_range(s1)
        ok2 = in_range(t2) & in_range(s2)
        t = np.where(ok1, t1, t2)
        s = np.where(ok1, s1, s2)
        ok = ok1 | ok2
    s = np.where(ok, s, 0.0)
    t = np.where(ok, t, 0.0)
    return np.clip(s, 0.0, 1.0), np.clip(t, 0.0, 1.0), ok


def _sample_bilinear(image: np.ndarray, xs, ys):
    """Bilinear samples at float coordinates; clamps to the border."""
    h, w = image.shape[:2]
    x = np.clip(xs, 0.0, w - 1.0)
    y = np.clip(ys, 0.0, h - 1.0)
    x0 = np.floor(x).astype(np.int64)
    y0 = np.floor(y).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (x - x0)[..., None]
    fy = (y - y0)[..., None]
    return (
        image[y0, x0] * (1 - fx) * (1 - fy)
        + image[y0, x1] * fx * (1 - fy)
        + image[y1, x0] * (1 - fx) * fy
        + image[y1, x1] * fx * fy
    )


def _sample_nearest(image: np.ndarray, xs, ys):
    h, w = image.shape[:2]
    x = np.clip(np.rint(xs), 0, w - 1).astype(np.int64)
    y = np.clip(np.rint(ys), 0, h - 1).astype(np.int64)
    return image[y, x]


def warp_mesh_bilinear(image: np.ndarray, vx: np.ndarray, vy: np.ndarray,
                       src_xs: np.ndarray, src_ys: np.ndarray,
                       out_h: int, out_w: int, order: np.ndarray,
                       nearest: bool = False):
    """Piecewise-bilinear mesh warp via per-quad inverse mapping.

    vx/vy are (rows+1, cols+1) deformed vertex positions in canvas
    coordinates; src_xs/src_ys the original lattice. ``order`` lists
    cell ids (row * cols + col) in render order. Returns (out, mask)
    with out float64 (out_h, out_w, channels).
    """
    ch = image.shape[2]
    out = np.zeros((out_h, out_w, ch))
    mask = np.zeros((out_h, out_w), dtype=bool)
    cols = src_xs.shape[0] - 1
    cw = src_xs[1] - src_xs[0]
    chh = src_ys[1] - src_ys[0]
    for cid in order:
        r, c = divmod(int(cid), cols)
        q00 = np.array([vx[r, c], vy[r, c]])
        q10 = np.array([vx[r, c + 1], vy[r, c + 1]])
        q01 = np.array([vx[r + 1, c], vy[r + 1, c]])
        q11 = np.array([vx[r + 1, c + 1], vy[r + 1, c + 1]])
        xs_all = (q00[0], q10[0], q01[0], q11[0])
        ys_all = (q00[1], q10[1], q01[1], q11[1])
        x_lo = max(0, int(np.floor(min(xs_all))))
        x_hi = min(out_w - 1, int(np.ceil(max(xs_all))))
        y_lo = max(0, int(np.floor(min(ys_all))))
        y_hi = min(out_h - 1, int(np.ceil(max(ys_all))))
        if x_hi < x_lo or y_hi < y_lo:
            continue
        py, px = np.mgrid[y_lo:y_hi + 1, x_lo:x_hi + 1].astype(np.float64)
        s, t, ok = _invert_bilinear_grid(px, py, q00, q10, q01, q11)
        if not ok.any():
            continue
        sx = src_xs[c] + s * cw
        sy = src_ys[r] + t * chh
        samples = _sample_nearest(image, sx, sy) if nearest else _sample_bilinear(image, sx, sy)
        sub_out = out[y_lo:y_hi + 1, x_lo:x_hi + 1]
        sub_mask = mask[y_lo:y_hi + 1, x_lo:x_hi + 1]
        sub_out[ok] = samples[ok]
        sub_mask[ok] = True
    return out, mask


def warp_cells_homography(image: np.ndarray, quads: np.ndarray,
                          Hp_inv: np.ndarray, Tp_inv: np.ndarray,
                          cell_rects: np.ndarray, out_h: int, out_w: int,
                          tol: float, nearest: bool = False):
    """Piecewise-homographic warp of ``image`` (the reference).

    Per cell i: ``quads[i]`` are the 4 canvas-frame corner points used
    only for rasterization bounds; a canvas pixel p belongs to the cell
    when Hp_inv[i] @ p lands inside cell_rects[i] (target frame, with
    ``tol`` pixels of slack), and samples the image at Tp_inv[i] @ p.
    """
    ch = image.shape[2]
    out = np.zeros((out_h, out_w, ch))
    mask = np.zeros((out_h, out_w), dtype=bool)
    h_img, w_img = image.shape[:2]
    n = quads.shape[0]
    for i in range(n):
        xs_all = quads[i, :, 0]
        ys_all = quads[i, :, 1]
        if not (np.all(np.isfinite(xs_all)) and np.all(np.isfinite(ys_all))):
            continue
        x_lo = max(0, int(np.floor(xs_all.min())))
        x_hi = min(out_w - 1, int(np.ceil(xs_all.max())))
        y_lo = max(0, int(np.floor(ys_all.min())))
        y_hi = min(out_h - 1, int(np.ceil(ys_all.max())))
        if x_hi < x_lo or y_hi < y_lo:
            continue
        py, px = np.mgrid[y_lo:y_hi + 1, x_lo:x_hi + 1].astype(np.float64)
        A = Hp_inv[i]
        wt = A[2, 0] * px + A[2, 1] * py + A[2, 2]
        good = np.abs(wt) > 1e-12
        wt = np.where(good, wt, 1.0)
        tx = (A[0, 0] * px + A[0, 1] * py + A[0, 2]) / wt
        ty = (A[1, 0] * px + A[1, 1] * py + A[1, 2]) / wt
        x0, y0, x1, y1 = cell_rects[i]
        inside = (
            good
            & (tx >= x0 - tol) & (tx <= x1 + tol)
            & (ty >= y0 - tol) & (ty <= y1 + tol)
        )
        if not inside.any():
            continue
        B = Tp_inv[i]
        wr = B[2, 0] * px + B[2, 1] * py + B[2, 2]
        goodr = np.abs(wr) > 1e-12
        wr = np.where(goodr, wr, 1.0)
        rx = (B[0, 0] * px + B[0, 1] * py + B[0, 2]) / wr
        ry = (B[1, 0] * px + B[1, 1] * py + B[1, 2]) / wr
        inside &= goodr & (rx >= 0) & (rx <= w_img - 1) & (ry >= 0) & (ry <= h_img - 1)
        if not inside.any():
            continue
        samples = _sample_nearest(image, rx, ry) if nearest else _sample_bilinear(image, rx, ry)
        sub_out = out[y_lo:y_hi + 1, x_lo:x_hi + 1]
        sub_mask = mask[y_lo:y_hi + 1, x_lo:x_hi + 1]
        sub_out[inside] = samples[inside]
        sub_mask[inside] = True
    return out, mask


def ncc_map(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Windowed 3x3 NCC at every interior pixel of two gray rasters.

    Border pixels (no full window) are NaN. Constant-window convention:
    both windows constant and means within 1e-9 -> 1; both constant
    otherwise -> 0; exactly one constant -> 0.
    """

    def box3(x):
        s = x[:-2] + x[1:-1] + x[2:]
        return s[:, :-2] + s[:, 1:-1] + s[:, 2:]

    sa = box3(a)
    sb = box3(b)
    saa = box3(a * a)
    sbb = box3(b * b)
    sab = box3(a * b)
    var_a = saa - sa * sa / 9.0
    var_b = sbb - sb * sb / 9.0
    cov = sab - sa * sb / 9.0
    const_a = var_a < 1e-9
    const_b = var_b < 1e-9
    denom = np.sqrt(np.where(const_a | const_b, 1.0, var_a * var_b))
    ncc = cov / denom
    ncc = np.where(const_a & const_b, np.where(np.abs(sa - sb) / 9.0 < 1e-9, 1.0, 0.0), ncc)
    ncc = np.where(const_a ^ const_b, 0.0, ncc)
    out = np.full(a.shape, np.nan)
    out[1:-1, 1:-1] = ncc
    return out
