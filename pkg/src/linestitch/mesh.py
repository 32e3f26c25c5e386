"""Regular grid mesh over the target image, anchors, and line cutting.

The mesh is an axis-aligned lattice of (rows+1) x (cols+1) vertices
exactly covering the target image's continuous extent, which runs from
(0, 0) to (w-1, h-1) in the pixel-center convention. Cells are indexed
(row, col); cell centers are the quantity the moving-DLT weights and the
similarity blend weights are evaluated at.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .geometry import LineSegment


@dataclass(frozen=True)
class GridMesh:
    cols: int
    rows: int
    xs: np.ndarray  # (cols+1,) vertex x coordinates
    ys: np.ndarray  # (rows+1,) vertex y coordinates

    @property
    def cell_w(self) -> float:
        return float(self.xs[1] - self.xs[0])

    @property
    def cell_h(self) -> float:
        return float(self.ys[1] - self.ys[0])

    @property
    def n_cells(self) -> int:
        return self.cols * self.rows

    @property
    def n_vertices(self) -> int:
        return (self.cols + 1) * (self.rows + 1)

    @property
    def extent(self) -> tuple[float, float, float, float]:
        return float(self.xs[0]), float(self.ys[0]), float(self.xs[-1]), float(self.ys[-1])

    def vertices(self) -> np.ndarray:
        """(rows+1, cols+1, 2) lattice positions."""
        gx, gy = np.meshgrid(self.xs, self.ys)
        return np.stack([gx, gy], axis=-1)

    def vertex_array(self) -> np.ndarray:
        """(n_vertices, 2) positions in row-major vertex order."""
        return self.vertices().reshape(-1, 2)

    def cell_centers(self) -> np.ndarray:
        """(rows, cols, 2) midpoints of every cell."""
        cx = 0.5 * (self.xs[:-1] + self.xs[1:])
        cy = 0.5 * (self.ys[:-1] + self.ys[1:])
        gx, gy = np.meshgrid(cx, cy)
        return np.stack([gx, gy], axis=-1)

    def vertex_index(self, row: int, col: int) -> int:
        return row * (self.cols + 1) + col

    def cell_of_point(self, p) -> tuple[int, int]:
        """(row, col) of the cell containing p, clamped to the boundary."""
        x, y = p
        x0, y0, x1, y1 = self.extent
        if not (x0 - 1e-9 <= x <= x1 + 1e-9 and y0 - 1e-9 <= y <= y1 + 1e-9):
            raise ValidationError(f"point ({x}, {y}) outside mesh extent {self.extent}")
        col = min(self.cols - 1, max(0, int((x - x0) / self.cell_w)))
        row = min(self.rows - 1, max(0, int((y - y0) / self.cell_h)))
        return row, col

    def contains(self, p) -> bool:
        x, y = p
        x0, y0, x1, y1 = self.extent
        return x0 - 1e-9 <= x <= x1 + 1e-9 and y0 - 1e-9 <= y <= y1 + 1e-9


def build_mesh(image_size: tuple[int, int], short_side_cells: int = 40) -> GridMesh:
    """Mesh whose shorter image side gets ``short_side_cells`` cells.

    The longer side gets a proportional count so cells stay close to
    square; the lattice endpoints land exactly on the image extent.
    """
    w, h = image_size
    if w < 2 or h < 2:
        raise ValidationError(f"image size {image_size} too small to mesh")
    ew, eh = float(w - 1), float(h - 1)
    if eh <= ew:
        rows = short_side_cells
        cols = max(1, round(short_side_cells * ew / eh))
    else:
        cols = short_side_cells
        rows = max(1, round(short_side_cells * eh / ew))
    return GridMesh(
        cols=cols,
        rows=rows,
        xs=np.linspace(0.0, ew, cols + 1),
        ys=np.linspace(0.0, eh, rows + 1),
    )


@dataclass(frozen=True)
class BilinearAnchor:
    """A point expressed over its cell's four vertices.

    Vertex order is (top-left, top-right, bottom-left, bottom-right);
    weights are the closed-form bilinear products of the normalized
    in-cell offsets and sum to 1.
    """

    cell: tuple[int, int]          # (row, col)
    vertex_ids: np.ndarray         # (4,) flat vertex indices
    weights: np.ndarray            # (4,)

    def interpolate(self, vertex_positions: np.ndarray) -> np.ndarray:
        """Position of the anchored point for (n_vertices, 2) positions."""
        return self.weights @ vertex_positions[self.vertex_ids]


def bilinear_anchor(p, mesh: GridMesh) -> BilinearAnchor:
    """Anchor a point of the ORIGINAL regular grid; raises if outside."""
    row, col = mesh.cell_of_point(p)
    x0, y0 = mesh.xs[col], mesh.ys[row]
    s = (p[0] - x0) / mesh.cell_w
    t = (p[1] - y0) / mesh.cell_h
    s = min(1.0, max(0.0, s))
    t = min(1.0, max(0.0, t))
    weights = np.array([
        (1 - s) * (1 - t),
        s * (1 - t),
        (1 - s) * t,
        s * t,
    ])
    ids = np.array([
        mesh.vertex_index(row, col),
        mesh.vertex_index(row, col + 1),
        mesh.vertex_index(row + 1, col),
        mesh.vertex_index(row + 1, col + 1),
    ])
    return BilinearAnchor(cell=(row, col), vertex_ids=ids, weights=weights)


def interpolate_mesh_points(mesh: GridMesh, vertex_positions: np.ndarray,
                            points: np.ndarray) -> np.ndarray:
    """Evaluate the piecewise-bilinear mesh warp at target-frame points.

    This is the warp function the metrics use: each point is anchored in
    the ORIGINAL regular grid and interpolated over the supplied
    (n_vertices, 2) deformed positions. Points must lie inside the mesh.
    """
    flat = np.asarray(vertex_positions, dtype=np.float64).reshape(-1, 2)
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    out = np.empty_like(pts)
    for i, p in enumerate(pts):
        out[i] = bilinear_anchor(p, mesh).interpolate(flat)
    return out


def clip_segment_to_rect(p0, p1, rect) -> tuple[np.ndarray, np.ndarray] | None:
    """Liang-Barsky clip of segment p0->p1 to (x0, y0, x1, y1); None if outside."""
    x0, y0, x1, y1 = rect
    p0 = np.asarray(p0, dtype=np.float64)
    p1 = np.asarray(p1, dtype=np.float64)
    d = p1 - p0
    t0, t1 = 0.0, 1.0
    for p, q in (
        (-d[0], p0[0] - x0), (d[0], x1 - p0[0]),
        (-d[1], p0[1] - y0), (d[1], y1 - p0[1]),
    ):
        if abs(p) < 1e-15:
            if q < 0:
                return None
            continue
        r = q / p
        if p < 0:
            t0 = max(t0, r)
        else:
            t1 = min(t1, r)
        if t0 > t1:
            return None
    return p0 + t0 * d, p0 + t1 * d


def cut_line_by_grid(seg: LineSegment, mesh: GridMesh) -> list[np.ndarray]:
    """Ordered points where the segment crosses interior grid lines.

    The segment is first clipped to the mesh extent. The result runs
    from the (clipped) head to the (clipped) tail, includes both, and
    every consecutive pair lies within one shared cell. Returns [] when
    the segment misses the mesh entirely.
    """
    clipped = clip_segment_to_rect(seg.p0, seg.p1, mesh.extent)
    if clipped is None:
        return []
    a, b = clipped
    d = b - a
    ts = [0.0, 1.0]
    for axis, lines in ((0, mesh.xs), (1, mesh.ys)):
        if abs(d[axis]) < 1e-12:
            continue
        for v in lines[1:-1]:
            t = (v - a[axis]) / d[axis]
            if 1e-12 < t < 1 - 1e-12:
                ts.append(float(t))
    ts = sorted(set(ts))
    pts = [a + t * d for t in ts]
    # drop numerically repeated crossings (segment through a lattice corner)
    out = [pts[0]]
    for p in pts[1:]:
        if np.hypot(*(p - out[-1])) > 1e-9:
            out.append(p)
    return out
