"""Numba @njit twins of the hot kernels in kernels_numpy.py.

Same inputs, same outputs, explicit per-pixel / per-cell loops. Import
this module only when the numba path is active; the jit compilation is
cached on disk after the first run.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def weighted_nullvec_batch(C, row_weights):
    n = row_weights.shape[0]
    r = C.shape[0]
    minimal = r < 9  # 8-row systems need the full SVD for the null vector
    h = np.empty((n, 9))
    sv = np.empty((n, 3))
    A = np.empty((r, 9))
    for i in range(n):
        for j in range(r):
            w = row_weights[i, j]
            for k in range(9):
                A[j, k] = w * C[j, k]
        _, s, vt = np.linalg.svd(A, minimal)
        for k in range(9):
            h[i, k] = vt[8, k]
        sv[i, 0] = s[0]
        sv[i, 1] = s[7]
        sv[i, 2] = 0.0 if minimal else s[8]
    return h, sv


@njit(cache=True)
def point_segment_distance_matrix(centers, segments):
    n = centers.shape[0]
    k = segments.shape[0]
    out = np.empty((n, k))
    for j in range(k):
        x0, y0, x1, y1 = segments[j, 0], segments[j, 1], segments[j, 2], segments[j, 3]
        dx = x1 - x0
        dy = y1 - y0
        len2 = dx * dx + dy * dy
        for i in range(n):
            cx = centers[i, 0]
            cy = centers[i, 1]
            if len2 < 1e-18:
                t = 0.0
            else:
                t = ((cx - x0) * dx + (cy - y0) * dy) / len2
                if t < 0.0:
                    t = 0.0
                elif t > 1.0:
                    t = 1.0
            ex = cx - (x0 + t * dx)
            ey = cy - (y0 + t * dy)
            out[i, j] = np.sqrt(ex * ex + ey * ey)
    return out


@njit(cache=True, inline="always")
def _sample_bilinear_px(image, x, y):
    h = image.shape[0]
    w = image.shape[1]
    if x < 0.0:
        x = 0.0
    elif x > w - 1.0:
        x = w - 1.0
    if y < 0.0:
        y = 0.0
    elif y > h - 1.0:
        y = h - 1.0
    x0 = int(np.floor(x))
    y0 = int(np.floor(y))
    x1 = min(x0 + 1, w - 1)
    y1 = min(y0 + 1, h - 1)
    fx = x - x0
    fy = y - y0
    out = np.empty(image.shape[2])
    for c in range(image.shape[2]):
        out[c] = (
            image[y0, x0, c] * (1 - fx) * (1 - fy)
            + image[y0, x1, c] * fx * (1 - fy)
            + image[y1, x0, c] * (1 - fx) * fy
            + image[y1, x1, c] * fx * fy
        )
    return out


@njit(cache=True, inline="always")
def _sample_nearest_px(image, x, y):
    h = image.shape[0]
    w = image.shape[1]
    xi = int(np.rint(x))
    yi = int(np.rint(y))
    if xi < 0:
        xi = 0
    elif xi > w - 1:
        xi = w - 1
    if yi < 0:
        yi = 0
    elif yi > h - 1:
        yi = h - 1
    return image[yi, xi].astype(np.float64)


@njit(cache=True)
def warp_mesh_bilinear(image, vx, vy, src_xs, src_ys, out_h, out_w, order, nearest=False):
    ch = image.shape[2]
    out = np.zeros((out_h, out_w, ch))
    mask = np.zeros((out_h, out_w), dtype=np.bool_)
    cols = src_xs.shape[0] - 1
    cw = src_xs[1] - src_xs[0]
    chh = src_ys[1] - src_ys[0]
    eps = 1e-7
    for oi in range(order.shape[0]):
        cid = order[oi]
        r = cid // cols
        c = cid % cols
        q00x, q00y = vx[r, c], vy[r, c]
        q10x, q10y = vx[r, c + 1], vy[r, c + 1]
        q01x, q01y = vx[r + 1, c], vy[r + 1, c]
        q11x, q11y = vx[r + 1, c + 1], vy[r + 1, c + 1]
        ex, ey = q10x - q00x, q10y - q00y
        fx_, fy_ = q01x - q00x, q01y - q00y
        gx, gy = q11x - q10x - q01x + q00x, q11y - q10y - q01y + q00y
        x_lo = max(0, int(np.floor(min(min(q00x, q10x), min(q01x, q11x)))))
        x_hi = min(out_w - 1, int(np.ceil(max(max(q00x, q10x), max(q01x, q11x)))))
        y_lo = max(0, int(np.floor(min(min(q00y, q10y), min(q01y, q11y)))))
        y_hi = min(out_h - 1, int(np.ceil(max(max(q00y, q10y), max(q01y, q11y)))))
        if x_hi < x_lo or y_hi < y_lo:
            continue
        a2 = -(fx_ * gy - fy_ * gx)
        cfe = fx_ * ey - fy_ * ex
        for pyi in range(y_lo, y_hi + 1):
            for pxi in range(x_lo, x_hi + 1):
                hx = pxi - q00x
                hy = pyi - q00y
                a1 = (hx * gy - hy * gx) - cfe
                a0 = hx * ey - hy * ex
                ok = False
                s = 0.0
                t = 0.0
                if abs(a2) < 1e-12:
                    if abs(a1) > 1e-14:
                        t_cand = -a0 / a1
                        s_cand, valid = _s_for(hx, hy, ex, ey, fx_, fy_, gx, gy, t_cand)
                        if valid and -eps <= t_cand <= 1 + eps and -eps <= s_cand <= 1 + eps:
                            s, t, ok = s_cand, t_cand, True
                else:
                    disc = a1 * a1 - 4.0 * a2 * a0
                    if disc >= 0.0:
                        # stable quadratic roots q/a2 and a0/q
                        root = np.sqrt(disc)
                        sgn = 1.0 if a1 >= 0.0 else -1.0
                        q = -0.5 * (a1 + sgn * root)
                        t1 = q / a2
                        t2 = a0 / q if abs(q) > 1e-300 else t1
                        for t_cand in (t1, t2):
                            if -eps <= t_cand <= 1 + eps:
                                s_cand, valid = _s_for(hx, hy, ex, ey, fx_, fy_, gx, gy, t_cand)
                                if valid and -eps <= s_cand <= 1 + eps:
                                    s, t, ok = s_cand, t_cand, True
                                    break
                if not ok:
                    continue
                if s < 0.0:
                    s = 0.0
                elif s > 1.0:
                    s = 1.0
                if t < 0.0:
                    t = 0.0
                elif t > 1.0:
                    t = 1.0
                sx = src_xs[c] + s * cw
                sy = src_ys[r] + t * chh
                if nearest:
                    val = _sample_nearest_px(image, sx, sy)
                else:
                    val = _sample_bilinear_px(image, sx, sy)
                for ci in range(ch):
                    out[pyi, pxi, ci] = val[ci]
                mask[pyi, pxi] = True
    return out, mask


@njit(cache=True, inline="always")
def _s_for(hx, hy, ex, ey, fx_, fy_, gx, gy, t):
    denx = ex + t * gx
    deny = ey + t * gy
    if abs(denx) >= abs(deny):
        denom = denx
        numer = hx - t * fx_
    else:
        denom = deny
        numer = hy - t * fy_
    if abs(denom) <= 1e-14:
        return 0.0, False
    return numer / denom, True


@njit(cache=True)
def warp_cells_homography(image, quads, Hp_inv, Tp_inv, cell_rects,
                          out_h, out_w, tol, nearest=False):
    ch = image.shape[2]
    out = np.zeros((out_h, out_w, ch))
    mask = np.zeros((out_h, out_w), dtype=np.bool_)
    h_img = image.shape[0]
    w_img = image.shape[1]
    n = quads.shape[0]
    for i in range(n):
        finite = True
        for k in range(4):
            if not (np.isfinite(quads[i, k, 0]) and np.isfinite(quads[i, k, 1])):
                finite = False
        if not finite:
            continue
        x_lo = max(0, int(np.floor(quads[i, :, 0].min())))
        x_hi = min(out_w - 1, int(np.ceil(quads[i, :, 0].max())))
        y_lo = max(0, int(np.floor(quads[i, :, 1].min())))
        y_hi = min(out_h - 1, int(np.ceil(quads[i, :, 1].max())))
        if x_hi < x_lo or y_hi < y_lo:
            continue
        A = Hp_inv[i]
        B = Tp_inv[i]
        x0, y0, x1, y1 = cell_rects[i, 0], cell_rects[i, 1], cell_rects[i, 2], cell_rects[i, 3]
        for pyi in range(y_lo, y_hi + 1):
            for pxi in range(x_lo, x_hi + 1):
                wt = A[2, 0] * pxi + A[2, 1] * pyi + A[2, 2]
                if abs(wt) <= 1e-12:
                    continue
                tx = (A[0, 0] * pxi + A[0, 1] * pyi + A[0, 2]) / wt
                ty = (A[1, 0] * pxi + A[1, 1] * pyi + A[1, 2]) / wt
                if not (x0 - tol <= tx <= x1 + tol and y0 - tol <= ty <= y1 + tol):
                    continue
                wr = B[2, 0] * pxi + B[2, 1] * pyi + B[2, 2]
                if abs(wr) <= 1e-12:
                    continue
                rx = (B[0, 0] * pxi + B[0, 1] * pyi + B[0, 2]) / wr
                ry = (B[1, 0] * pxi + B[1, 1] * pyi + B[1, 2]) / wr
                if not (0.0 <= rx <= w_img - 1.0 and 0.0 <= ry <= h_img - 1.0):
                    continue
                if nearest:
                    val = _sample_nearest_px(image, rx, ry)
                else:
                    val = _sample_bilinear_px(image, rx, ry)
                for ci in range(ch):
                    out[pyi, pxi, ci] = val[ci]
                mask[pyi, pxi] = True
    return out, mask


@njit(cache=True)
def ncc_map(a, b):
    h, w = a.shape
    out = np.full((h, w), np.nan)
    for y in range(1, h - 1):
        for x in range(1, w - 1):
            sa = 0.0
            sb = 0.0
            saa = 0.0
            sbb = 0.0
            sab = 0.0
            for dy in range(-1, 2):
                for dx in range(-1, 2):
                    va = a[y + dy, x + dx]
                    vb = b[y + dy, x + dx]
                    sa += va
                    sb += vb
                    saa += va * va
                    sbb += vb * vb
                    sab += va * vb
            var_a = saa - sa * sa / 9.0
            var_b = sbb - sb * sb / 9.0
            const_a = var_a < 1e-9
            const_b = var_b < 1e-9
            if const_a and const_b:
                out[y, x] = 1.0 if abs(sa - sb) / 9.0 < 1e-9 else 0.0
            elif const_a or const_b:
                out[y, x] = 0.0
            else:
                out[y, x] = (sab - sa * sb / 9.0) / np.sqrt(var_a * var_b)
    return out
