import numpy as np
import pytest

from linestitch.errors import ValidationError
from linestitch.geometry import line_from_endpoints
from linestitch.mesh import (
    GridMesh,
    bilinear_anchor,
    build_mesh,
    clip_segment_to_rect,
    cut_line_by_grid,
)
from linestitch.rng import CounterStream


def unit_mesh(cols=4, rows=3):
    return GridMesh(cols=cols, rows=rows,
                    xs=np.arange(cols + 1, dtype=float),
                    ys=np.arange(rows + 1, dtype=float))


class TestBuildMesh:
    def test_covers_image_exactly(self):
        mesh = build_mesh((320, 240), short_side_cells=10)
        assert mesh.xs[0] == 0.0 and mesh.xs[-1] == 319.0
        assert mesh.ys[0] == 0.0 and mesh.ys[-1] == 239.0
        assert mesh.rows == 10  # height is the short side
        assert mesh.cols == round(10 * 319 / 239)

    def test_cells_near_square(self):
        mesh = build_mesh((800, 600), short_side_cells=40)
        assert abs(mesh.cell_w - mesh.cell_h) / mesh.cell_h < 0.05

    def test_cell_centers_are_midpoints(self):
        mesh = unit_mesh()
        centers = mesh.cell_centers()
        assert centers.shape == (3, 4, 2)
        assert np.allclose(centers[0, 0], [0.5, 0.5])
        assert np.allclose(centers[2, 3], [3.5, 2.5])

    def test_cell_of_point(self):
        mesh = unit_mesh()
        assert mesh.cell_of_point((0.5, 0.5)) == (0, 0)
        assert mesh.cell_of_point((3.999, 2.999)) == (2, 3)
        assert mesh.cell_of_point((4.0, 3.0)) == (2, 3)  # boundary clamps inward
        with pytest.raises(ValidationError):
            mesh.cell_of_point((5.0, 1.0))


class TestBilinearAnchor:
    def test_vertex_gets_unit_weight(self):
        mesh = unit_mesh()
        a = bilinear_anchor((1.0, 1.0), mesh)
        assert a.weights.max() == pytest.approx(1.0)
        assert a.weights.sum() == pytest.approx(1.0)
        v = mesh.vertex_array()
        assert np.allclose(a.interpolate(v), [1.0, 1.0])

    def test_cell_center_equal_weights(self):
        mesh = unit_mesh()
        a = bilinear_anchor((1.5, 2.5), mesh)
        assert np.allclose(a.weights, 0.25)

    def test_quarter_half_offsets(self):
        mesh = unit_mesh()
        a = bilinear_anchor((0.25, 0.5), mesh)
        assert np.allclose(a.weights, [0.375, 0.125, 0.375, 0.125])

    def test_reproduces_point_on_regular_grid(self):
        mesh = unit_mesh()
        v = mesh.vertex_array()
        stream = CounterStream(11)
        for _ in range(200):
            p = stream.uniform(2, 0, [4.0, 3.0][0])
            p = np.array([p[0], stream.uniform(1, 0, 3.0)[0]])
            a = bilinear_anchor(p, mesh)
            assert np.abs(a.interpolate(v) - p).max() < 1e-12
            assert abs(a.weights.sum() - 1.0) < 1e-12
            assert np.all(a.weights >= 0) and np.all(a.weights <= 1)

    def test_outside_raises(self):
        with pytest.raises(ValidationError):
            bilinear_anchor((-0.5, 1.0), unit_mesh())


class TestClip:
    def test_fully_inside(self):
        got = clip_segment_to_rect((0.5, 0.5), (1.5, 1.5), (0, 0, 4, 3))
        assert np.allclose(got[0], [0.5, 0.5]) and np.allclose(got[1], [1.5, 1.5])

    def test_crossing(self):
        got = clip_segment_to_rect((-1.0, 1.0), (5.0, 1.0), (0, 0, 4, 3))
        assert np.allclose(got[0], [0.0, 1.0]) and np.allclose(got[1], [4.0, 1.0])

    def test_outside_returns_none(self):
        assert clip_segment_to_rect((-2, -2), (-1, -1), (0, 0, 4, 3)) is None


class TestCutLineByGrid:
    def test_interior_segment_only_endpoints(self):
        mesh = unit_mesh()
        seg = line_from_endpoints((0.2, 0.2), (0.8, 0.7))
        pts = cut_line_by_grid(seg, mesh)
        assert len(pts) == 2
        assert np.allclose(pts[0], [0.2, 0.2]) and np.allclose(pts[1], [0.8, 0.7])

    def test_horizontal_crossings(self):
        mesh = unit_mesh()
        seg = line_from_endpoints((0.5, 0.5), (2.5, 0.5))
        pts = cut_line_by_grid(seg, mesh)
        assert len(pts) == 4
        assert np.allclose([p[0] for p in pts], [0.5, 1.0, 2.0, 2.5])

    def test_diagonal_crossings_match_parametric_oracle(self):
        mesh = unit_mesh()
        p0 = np.array([0.5, 0.5])
        p1 = np.array([2.5, 1.5])
        seg = line_from_endpoints(p0, p1)
        pts = cut_line_by_grid(seg, mesh)
        # brute-force oracle: every interior lattice line intersection param
        d = p1 - p0
        ts = {0.0, 1.0}
        for v in [1.0, 2.0, 3.0]:
            t = (v - p0[0]) / d[0]
            if 0 < t < 1:
                ts.add(round(t, 12))
        for v in [1.0, 2.0]:
            t = (v - p0[1]) / d[1]
            if 0 < t < 1:
                ts.add(round(t, 12))
        expected = [p0 + t * d for t in sorted(ts)]
        assert len(pts) == len(expected) == 5
        for got, want in zip(pts, expected):
            assert np.abs(got - want).max() < 1e-12

    def test_consecutive_points_share_a_cell(self):
        mesh = unit_mesh()
        stream = CounterStream(12)
        for _ in range(50):
            p0 = np.array([stream.uniform(1, 0, 4)[0], stream.uniform(1, 0, 3)[0]])
            p1 = np.array([stream.uniform(1, 0, 4)[0], stream.uniform(1, 0, 3)[0]])
            if np.linalg.norm(p1 - p0) < 0.1:
                continue
            pts = cut_line_by_grid(line_from_endpoints(p0, p1), mesh)
            for a, b in zip(pts[:-1], pts[1:]):
                mid = 0.5 * (a + b)
                row, col = mesh.cell_of_point(mid)
                for p in (a, b):
                    assert mesh.xs[col] - 1e-9 <= p[0] <= mesh.xs[col + 1] + 1e-9
                    assert mesh.ys[row] - 1e-9 <= p[1] <= mesh.ys[row + 1] + 1e-9

    def test_segment_outside_mesh_empty(self):
        mesh = unit_mesh()
        seg = line_from_endpoints((10.0, 10.0), (12.0, 12.0))
        assert cut_line_by_grid(seg, mesh) == []
