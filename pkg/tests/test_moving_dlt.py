import numpy as np
import pytest

from linestitch.dlt import estimate_global_homography
from linestitch.geometry import line_from_endpoints, normalize_homography
from linestitch.mesh import build_mesh
from linestitch.moving_dlt import (
    constant_field,
    estimate_local_warp,
    line_weight,
    point_weight,
)
from linestitch.rng import CounterStream
from linestitch.synth import generate, single_plane_scene, two_plane_scene
from tests.test_dlt import rel_frobenius


class TestWeights:
    def test_zero_distance_gives_one(self):
        assert point_weight((5, 5), (5, 5)) == pytest.approx(1.0)

    def test_sigma_distance_gives_inv_e(self):
        assert point_weight((0, 0), (8.5, 0), sigma=8.5, eta=0.01) == pytest.approx(np.exp(-1))

    def test_floor_active_far_away(self):
        assert point_weight((0, 0), (100, 0), sigma=8.5, eta=0.01) == 0.01

    def test_line_weight_on_segment(self):
        seg = line_from_endpoints((0, 0), (10, 0))
        assert line_weight((5, 0), seg) == pytest.approx(1.0)

    def test_line_weight_perpendicular_sigma(self):
        seg = line_from_endpoints((0, 0), (10, 0))
        assert line_weight((5, 8.5), seg, sigma=8.5, eta=0.01) == pytest.approx(np.exp(-1))

    def test_line_weight_floor_beyond_endpoint(self):
        seg = line_from_endpoints((0, 0), (10, 0))
        assert line_weight((10 + 85.0, 0), seg, sigma=8.5, eta=0.01) == 0.01

    def test_monotone_in_distance(self):
        ds = np.linspace(0, 60, 40)
        ws = [point_weight((0, 0), (d, 0), sigma=8.5, eta=0.01) for d in ds]
        assert all(a >= b for a, b in zip(ws[:-1], ws[1:]))
        assert max(ws) == 1.0 and min(ws) == 0.01


class TestLocalWarp:
    def test_saturated_weights_equal_global(self):
        scene = single_plane_scene(seed=31, n_points=25, n_lines=10, noise_sigma=1.0)
        cs, _ = generate(scene)
        mesh = build_mesh(cs.target_size, short_side_cells=4)
        field = estimate_local_warp(cs.points, cs.lines, mesh, sigma=8.5, eta=1.0)
        H_global = estimate_global_homography(cs.points, cs.lines)
        for H in field.flat():
            assert np.abs(H - H_global).max() < 1e-9

    def test_single_plane_every_cell_recovers_truth(self):
        scene = single_plane_scene(seed=32, n_points=30, n_lines=12)
        cs, gt = generate(scene)
        mesh = build_mesh(cs.target_size, short_side_cells=6)
        field = estimate_local_warp(cs.points, cs.lines, mesh, sigma=8.5, eta=0.01)
        for H in field.flat():
            assert rel_frobenius(H, gt.homographies[0]) < 1e-6

    def test_sigma_to_infinity_converges_to_global(self):
        scene = single_plane_scene(seed=33, n_points=25, n_lines=8, noise_sigma=1.5)
        cs, _ = generate(scene)
        mesh = build_mesh(cs.target_size, short_side_cells=4)
        field = estimate_local_warp(cs.points, cs.lines, mesh, sigma=1e6, eta=0.01)
        H_global = estimate_global_homography(cs.points, cs.lines)
        for H in field.flat():
            assert np.abs(H - H_global).max() < 1e-6

    def test_two_plane_recovery_left_right(self):
        # Two planes sharing perspective/affine structure but offset in
        # translation (the classic two-depth parallax). With eta = 0 the
        # far halves decouple (opposite-plane weights underflow to zero),
        # so the outer columns match the per-half points-only DLT oracle.
        P = np.eye(3); P[2, 0] = 2e-4; P[0, 0] = 1.02
        H_a = P.copy(); H_a[0, 2] = 6.0
        H_b = P.copy(); H_b[0, 2] = 14.0; H_b[1, 2] = 3.0
        scene = two_plane_scene(seed=34, H_left=H_a, H_right=H_b, n_points=250,
                                image_size=(320, 240))
        cs, gt = generate(scene)
        mesh = build_mesh(cs.target_size, short_side_cells=8)
        field = estimate_local_warp(cs.points, np.empty((0, 8)), mesh, sigma=8.5, eta=0.0)
        # oracle: per-half points-only global DLT
        H_left = estimate_global_homography(cs.points[gt.point_plane == 0])
        H_right = estimate_global_homography(cs.points[gt.point_plane == 1])
        for r in range(mesh.rows):
            assert rel_frobenius(field.cell(r, 0), H_left) < 1e-3
            assert rel_frobenius(field.cell(r, mesh.cols - 1), H_right) < 1e-3

    def test_adjacent_cells_smoother_than_distant(self):
        # smooth low-frequency displacement fields: nearby cells should fit
        # more similar homographies than cells ten columns apart
        wins = 0
        for seed in range(20):
            stream = CounterStream(500 + seed)
            n = 120
            pts = np.column_stack([stream.uniform(n, 0, 320), stream.uniform(n, 0, 240)])
            dx = 6.0 * np.sin(2 * np.pi * pts[:, 0] / 320.0 + stream.uniform(1)[0] * 6)
            dy = 6.0 * np.cos(2 * np.pi * pts[:, 1] / 240.0 + stream.uniform(1)[0] * 6)
            matches = np.column_stack([pts, pts[:, 0] + dx, pts[:, 1] + dy])
            mesh = build_mesh((320, 240), short_side_cells=12)
            field = estimate_local_warp(matches, np.empty((0, 8)), mesh, sigma=25.0, eta=0.01)
            mid = mesh.rows // 2
            H = field.homographies[mid]
            adjacent = np.linalg.norm(normalize_homography(H[1]) - normalize_homography(H[0]))
            distant = np.linalg.norm(normalize_homography(H[11]) - normalize_homography(H[0]))
            if adjacent < distant:
                wins += 1
        assert wins >= 16

    def test_constant_field(self):
        mesh = build_mesh((100, 80), short_side_cells=3)
        H = np.diag([2.0, 2.0, 1.0])
        field = constant_field(mesh, H)
        assert field.homographies.shape == (3, 4, 3, 3) or field.homographies.shape[2:] == (3, 3)
        assert np.all(field.flat() == H)
