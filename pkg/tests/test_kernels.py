"""Parity between the numba and numpy kernel implementations.

The numpy path is always exercised directly; the numba comparisons run
only when numba is importable (they are the same functions the package
dispatches to by default).
"""

import numpy as np
import pytest

from linestitch import kernels_numpy
from linestitch.accel import HAVE_NUMBA
from linestitch.rng import CounterStream

if HAVE_NUMBA:
    from linestitch import kernels_numba

needs_numba = pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")


def make_dlt_inputs(seed=1001, n_rows=40, n_cells=12):
    stream = CounterStream(seed)
    C = stream.uniform(n_rows * 9, -1, 1).reshape(n_rows, 9)
    w = stream.uniform(n_cells * n_rows, 0.01, 1.0).reshape(n_cells, n_rows)
    return C, w


def make_mesh_inputs(seed=1002, cols=5, rows=4, out=(60, 80)):
    stream = CounterStream(seed)
    src_xs = np.linspace(0.0, 63.0, cols + 1)
    src_ys = np.linspace(0.0, 47.0, rows + 1)
    gx, gy = np.meshgrid(src_xs, src_ys)
    vx = gx + stream.normal((rows + 1) * (cols + 1), 1.5).reshape(rows + 1, cols + 1) + 5.0
    vy = gy + stream.normal((rows + 1) * (cols + 1), 1.5).reshape(rows + 1, cols + 1) + 5.0
    img = stream.uniform(48 * 64 * 3, 0, 255).reshape(48, 64, 3)
    order = np.arange(cols * rows)
    return img, vx, vy, src_xs, src_ys, out[0], out[1], order


def make_cells_inputs(seed=1003, n=6):
    stream = CounterStream(seed)
    img = stream.uniform(48 * 64 * 3, 0, 255).reshape(48, 64, 3)
    quads = np.empty((n, 4, 2))
    Hp_inv = np.empty((n, 3, 3))
    Tp_inv = np.empty((n, 3, 3))
    rects = np.empty((n, 4))
    for i in range(n):
        x0 = 10.0 * i
        rects[i] = (x0, 0.0, x0 + 12.0, 47.0)
        T = np.eye(3)
        T[0, 2], T[1, 2] = stream.uniform(2, -4, 4)
        quads[i] = np.array([
            [x0 + T[0, 2], T[1, 2]],
            [x0 + 12.0 + T[0, 2], T[1, 2]],
            [x0 + 12.0 + T[0, 2], 47.0 + T[1, 2]],
            [x0 + T[0, 2], 47.0 + T[1, 2]],
        ])
        Hp_inv[i] = np.linalg.inv(T)
        Tp_inv[i] = np.linalg.inv(T)
    return img, quads, Hp_inv, Tp_inv, rects


class TestNumpyPath:
    def test_nullvec_minimizes(self):
        C, w = make_dlt_inputs()
        h, sv = kernels_numpy.weighted_nullvec_batch(C, w)
        stream = CounterStream(7)
        for i in range(w.shape[0]):
            WC = w[i][:, None] * C
            base = np.linalg.norm(WC @ h[i])
            assert abs(np.linalg.norm(h[i]) - 1.0) < 1e-12
            assert base == pytest.approx(sv[i, 2], abs=1e-9)
            for _ in range(5):
                d = stream.normal(9)
                cand = h[i] + 1e-4 * d / np.linalg.norm(d)
                cand /= np.linalg.norm(cand)
                assert np.linalg.norm(WC @ cand) >= base - 1e-12

    def test_segment_distance_matches_scalar(self):
        from linestitch.geometry import LineSegment, point_segment_distance
        stream = CounterStream(8)
        centers = stream.uniform(20, -50, 150).reshape(10, 2)
        segs = stream.uniform(24, 0, 100).reshape(6, 4)
        D = kernels_numpy.point_segment_distance_matrix(centers, segs)
        for i, c in enumerate(centers):
            for j, s in enumerate(segs):
                want = point_segment_distance(c, LineSegment(s[0:2], s[2:4]))
                assert D[i, j] == pytest.approx(want, abs=1e-12)

    def test_ncc_window_conventions(self):
        a = np.full((5, 5), 10.0)
        b = np.full((5, 5), 10.0)
        assert kernels_numpy.ncc_map(a, b)[2, 2] == 1.0
        b2 = np.full((5, 5), 20.0)
        assert kernels_numpy.ncc_map(a, b2)[2, 2] == 0.0

    def test_bilinear_inverse_roundtrip(self):
        # forward bilinear map of random (s, t) must invert exactly
        stream = CounterStream(9)
        q00 = np.array([3.0, 2.0])
        q10 = np.array([18.0, 4.0])
        q01 = np.array([2.0, 16.0])
        q11 = np.array([21.0, 19.0])
        for _ in range(100):
            s, t = stream.uniform(2)
            p = ((1 - s) * (1 - t) * q00 + s * (1 - t) * q10
                 + (1 - s) * t * q01 + s * t * q11)
            ss, tt, ok = kernels_numpy._invert_bilinear_grid(
                np.array([[p[0]]]), np.array([[p[1]]]), q00, q10, q01, q11
            )
            assert ok[0, 0]
            assert ss[0, 0] == pytest.approx(s, abs=1e-9)
            assert tt[0, 0] == pytest.approx(t, abs=1e-9)


@needs_numba
class TestParity:
    def test_weighted_nullvec(self):
        C, w = make_dlt_inputs()
        h_np, sv_np = kernels_numpy.weighted_nullvec_batch(C, w)
        h_nb, sv_nb = kernels_numba.weighted_nullvec_batch(C, w)
        # null vectors match up to sign
        for a, b in zip(h_np, h_nb):
            assert min(np.abs(a - b).max(), np.abs(a + b).max()) < 1e-9
        assert np.abs(sv_np - sv_nb).max() < 1e-9

    def test_segment_distances(self):
        stream = CounterStream(10)
        centers = stream.uniform(40, -50, 150).reshape(20, 2)
        segs = stream.uniform(32, 0, 100).reshape(8, 4)
        a = kernels_numpy.point_segment_distance_matrix(centers, segs)
        b = kernels_numba.point_segment_distance_matrix(centers, segs)
        assert np.abs(a - b).max() < 1e-12

    def test_warp_mesh(self):
        img, vx, vy, sx, sy, oh, ow, order = make_mesh_inputs()
        out_np, mask_np = kernels_numpy.warp_mesh_bilinear(img, vx, vy, sx, sy, oh, ow, order)
        out_nb, mask_nb = kernels_numba.warp_mesh_bilinear(img, vx, vy, sx, sy, oh, ow, order)
        assert np.array_equal(mask_np, mask_nb)
        assert np.abs(out_np - out_nb).max() < 1e-9

    def test_warp_mesh_nearest(self):
        img, vx, vy, sx, sy, oh, ow, order = make_mesh_inputs(seed=1004)
        out_np, mask_np = kernels_numpy.warp_mesh_bilinear(img, vx, vy, sx, sy, oh, ow, order, True)
        out_nb, mask_nb = kernels_numba.warp_mesh_bilinear(img, vx, vy, sx, sy, oh, ow, order, True)
        assert np.array_equal(mask_np, mask_nb)
        assert np.array_equal(out_np, out_nb)

    def test_warp_cells(self):
        img, quads, Hp_inv, Tp_inv, rects = make_cells_inputs()
        out_np, mask_np = kernels_numpy.warp_cells_homography(
            img, quads, Hp_inv, Tp_inv, rects, 60, 80, 0.5)
        out_nb, mask_nb = kernels_numba.warp_cells_homography(
            img, quads, Hp_inv, Tp_inv, rects, 60, 80, 0.5)
        assert np.array_equal(mask_np, mask_nb)
        assert np.abs(out_np - out_nb).max() < 1e-9

    def test_ncc(self):
        stream = CounterStream(11)
        a = stream.uniform(30 * 40, 0, 255).reshape(30, 40)
        b = stream.uniform(30 * 40, 0, 255).reshape(30, 40)
        m_np = kernels_numpy.ncc_map(a, b)
        m_nb = kernels_numba.ncc_map(a, b)
        inner = np.s_[1:-1, 1:-1]
        assert np.abs(m_np[inner] - m_nb[inner]).max() < 1e-9
        assert np.isnan(m_nb[0]).all() and np.isnan(m_np[0]).all()


def test_env_flag_selects_numpy(tmp_path):
    import subprocess
    import sys
    code = (
        "import linestitch.kernels as k; print(k.KERNEL_PATH)"
    )
    out = subprocess.run(
        [sys.executable, "-c", code],
        env={"PATH": "/usr/bin:/bin", "LINESTITCH_DISABLE_NUMBA": "1",
             "PYTHONPATH": "/root/pkg/src"},
        capture_output=True, text=True,
    )
    assert out.stdout.strip() == "numpy"


class TestMinimalRowCount:
    def test_eight_row_nullvec_numpy(self):
        # minimal system: h must be the exact null vector, s8 reported as 0
        stream = CounterStream(3131)
        C = stream.uniform(8 * 9, -1, 1).reshape(8, 9)
        w = np.ones((3, 8))
        h, sv = kernels_numpy.weighted_nullvec_batch(C, w)
        for i in range(3):
            assert np.abs(C @ h[i]).max() < 1e-12
            assert sv[i, 2] == 0.0

    @needs_numba
    def test_eight_row_nullvec_parity(self):
        stream = CounterStream(3232)
        C = stream.uniform(8 * 9, -1, 1).reshape(8, 9)
        w = stream.uniform(3 * 8, 0.1, 1.0).reshape(3, 8)
        h_np, sv_np = kernels_numpy.weighted_nullvec_batch(C, w)
        h_nb, sv_nb = kernels_numba.weighted_nullvec_batch(C, w)
        for a, b in zip(h_np, h_nb):
            assert min(np.abs(a - b).max(), np.abs(a + b).max()) < 1e-9
        assert np.abs(sv_np - sv_nb).max() < 1e-9
