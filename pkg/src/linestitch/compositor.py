"""Canvas computation, texture mapping of both images, and blending.

The target renders through the deformed mesh (piecewise-bilinear per
quad, inverse mapping). The reference renders through the per-cell
adjustment warps T' over a cell partition obtained by mapping the
target mesh cells (extended outward far enough to cover the reference
footprint) into the canvas. Both warps pull samples with bilinear
interpolation by default; a nearest mode exists for exactness tests.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import CanvasOverflowError, NumericalError, ValidationError
from .mesh import GridMesh

log = logging.getLogger(__name__)

DEFAULT_CANVAS_CAP = 64_000_000  # pixels


@dataclass(frozen=True)
class Canvas:
    width: int
    height: int
    offset: tuple[float, float]  # world position of canvas pixel (0, 0)

    def world_to_canvas(self, pts: np.ndarray) -> np.ndarray:
        return np.asarray(pts, dtype=np.float64) - np.asarray(self.offset)

    @property
    def translation(self) -> np.ndarray:
        T = np.eye(3)
        T[0, 2] = -self.offset[0]
        T[1, 2] = -self.offset[1]
        return T


@dataclass
class WarpedRaster:
    pixels: np.ndarray  # (H, W, 3) float64
    mask: np.ndarray    # (H, W) bool
    folded_quads: int = 0


def compute_canvas(*point_sets: np.ndarray, cap: int = DEFAULT_CANVAS_CAP) -> Canvas:
    """Tight integer bounding box of all supplied world-frame points."""
    pts = np.vstack([np.asarray(p, dtype=np.float64).reshape(-1, 2) for p in point_sets])
    if pts.size == 0 or not np.all(np.isfinite(pts)):
        raise NumericalError("canvas bounds require finite warped points")
    # 1e-6 slack so solver-level noise on integer bounds cannot grow the canvas
    x0 = float(np.floor(pts[:, 0].min() + 1e-6))
    y0 = float(np.floor(pts[:, 1].min() + 1e-6))
    x1 = float(np.ceil(pts[:, 0].max() - 1e-6))
    y1 = float(np.ceil(pts[:, 1].max() - 1e-6))
    width = int(x1 - x0) + 1
    height = int(y1 - y0) + 1
    if width * height > cap:
        raise CanvasOverflowError(
            f"canvas {width}x{height} exceeds the {cap / 1e6:.0f} MP cap"
        )
    return Canvas(width=width, height=height, offset=(x0, y0))


def _cross2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def _render_order(vertex_xy: np.ndarray, mesh: GridMesh) -> tuple[np.ndarray, int]:
    """Cell ids with well-oriented convex quads first, folded quads last.

    A quad is folded when any corner of its cycle turns the wrong way
    (edge cross product <= 0 in the lattice orientation).
    """
    v = vertex_xy.reshape(mesh.rows + 1, mesh.cols + 1, 2)
    cycle = [v[:-1, :-1], v[:-1, 1:], v[1:, 1:], v[1:, :-1]]
    folded = np.zeros((mesh.rows, mesh.cols), dtype=bool)
    for i in range(4):
        e0 = cycle[(i + 1) % 4] - cycle[i]
        e1 = cycle[(i + 2) % 4] - cycle[(i + 1) % 4]
        folded |= _cross2(e0, e1) <= 0
    folded = folded.ravel()
    ids = np.arange(mesh.n_cells)
    order = np.concatenate([ids[~folded], ids[folded]])
    n_folded = int(folded.sum())
    if n_folded:
        log.warning("%d folded mesh quad(s); rendering them last", n_folded)
    return order, n_folded


def warp_target(image: np.ndarray, mesh: GridMesh, vertex_positions: np.ndarray,
                canvas: Canvas, nearest: bool = False) -> WarpedRaster:
    """Render the target through its deformed mesh onto the canvas.

    ``vertex_positions`` are world-frame positions of the mesh vertices,
    row-major (n_vertices, 2).
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 2:
        img = img[..., None]
    v = canvas.world_to_canvas(vertex_positions.reshape(-1, 2))
    order, n_folded = _render_order(v, mesh)
    grid = v.reshape(mesh.rows + 1, mesh.cols + 1, 2)
    out, mask = kernels.warp_mesh_bilinear(
        np.ascontiguousarray(img),
        np.ascontiguousarray(grid[..., 0]),
        np.ascontiguousarray(grid[..., 1]),
        mesh.xs, mesh.ys,
        canvas.height, canvas.width,
        order, nearest,
    )
    return WarpedRaster(pixels=out, mask=mask, folded_quads=n_folded)


def _extended_cell_range(mesh: GridMesh, H_global: np.ndarray,
                         ref_size: tuple[int, int], margin: int = 2):
    """Cell index spans covering the reference footprint in the target frame."""
    w, h = ref_size
    corners = np.array([[0.0, 0.0], [w - 1.0, 0.0], [w - 1.0, h - 1.0], [0.0, h - 1.0]])
    Hinv = np.linalg.inv(H_global)
    hom = np.column_stack([corners, np.ones(4)]) @ Hinv.T
    if np.any(np.abs(hom[:, 2]) < 1e-9):
        # reference corners straddle the horizon: fall back to a fixed margin
        back = None
    else:
        back = hom[:, :2] / hom[:, 2:3]
        bound = 4.0 * max(mesh.xs[-1], mesh.ys[-1], float(w), float(h))
        back = np.clip(back, -bound, bound)
    x0, y0, x1, y1 = mesh.extent
    cw, chh = mesh.cell_w, mesh.cell_h
    if back is None:
        c_lo, c_hi = -margin, mesh.cols + margin
        r_lo, r_hi = -margin, mesh.rows + margin
    else:
        c_lo = min(0, int(np.floor((back[:, 0].min() - x0) / cw))) - margin
        c_hi = max(mesh.cols, int(np.ceil((back[:, 0].max() - x0) / cw))) + margin
        r_lo = min(0, int(np.floor((back[:, 1].min() - y0) / chh))) - margin
        r_hi = max(mesh.rows, int(np.ceil((back[:, 1].max() - y0) / chh))) + margin
    # keep the extension sane even for wild geometry
    c_lo = max(c_lo, -6 * mesh.cols)
    c_hi = min(c_hi, 7 * mesh.cols)
    r_lo = max(r_lo, -6 * mesh.rows)
    r_hi = min(r_hi, 7 * mesh.rows)
    return c_lo, c_hi, r_lo, r_hi


def warp_reference(image: np.ndarray, mesh: GridMesh, cell_H: np.ndarray,
                   cell_T: np.ndarray, H_global: np.ndarray, canvas: Canvas,
                   tol: float = 0.5, nearest: bool = False) -> WarpedRaster:
    """Render the reference through the per-cell adjustments T'.

    The target mesh cells (clamp-extended over the reference footprint)
    are mapped into the canvas per cell by T' H; each canvas pixel inside
    a mapped cell pulls its sample through that cell's T'^-1. ``tol`` is
    the cell-membership slack in target-frame pixels.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 2:
        img = img[..., None]
    h_img, w_img = img.shape[:2]
    c_lo, c_hi, r_lo, r_hi = _extended_cell_range(mesh, H_global, (w_img, h_img))
    x0, y0, _, _ = mesh.extent
    cw, chh = mesh.cell_w, mesh.cell_h
    Tc = canvas.translation

    quads = []
    Hp_inv = []
    Tp_inv = []
    rects = []
    for ri in range(r_lo, r_hi):
        for ci in range(c_lo, c_hi):
            r = min(mesh.rows - 1, max(0, ri))
            c = min(mesh.cols - 1, max(0, ci))
            H_i = cell_H[r, c]
            T_i = Tc @ cell_T[r, c]
            Hp = T_i @ H_i
            rx0 = x0 + ci * cw
            ry0 = y0 + ri * chh
            rect = (rx0, ry0, rx0 + cw, ry0 + chh)
            corners = np.array([
                [rect[0], rect[1]], [rect[2], rect[1]],
                [rect[2], rect[3]], [rect[0], rect[3]],
            ])
            hom = np.column_stack([corners, np.ones(4)]) @ Hp.T
            if np.any(hom[:, 2] <= 1e-9):
                continue  # cell crosses the horizon: nothing renderable
            quad = hom[:, :2] / hom[:, 2:3]
            try:
                Hp_i = np.linalg.inv(Hp)
                Tp_i = np.linalg.inv(T_i)
            except np.linalg.LinAlgError:
                continue
            quads.append(quad)
            Hp_inv.append(Hp_i)
            Tp_inv.append(Tp_i)
            rects.append(rect)
    if not quads:
        raise NumericalError("reference footprint is empty after horizon culling")
    out, mask = kernels.warp_cells_homography(
        np.ascontiguousarray(img),
        np.ascontiguousarray(np.array(quads)),
        np.ascontiguousarray(np.array(Hp_inv)),
        np.ascontiguousarray(np.array(Tp_inv)),
        np.ascontiguousarray(np.array(rects)),
        canvas.height, canvas.width, tol, nearest,
    )
    return WarpedRaster(pixels=out, mask=mask)


def blend_average(a: WarpedRaster, b: WarpedRaster) -> np.ndarray:
    """Intensity-average blend: mean in the overlap, copy elsewhere.

    Returns (H, W, 4) uint8 RGBA; alpha is 255 wherever either input is
    valid. Averaging happens in double precision, then clamps to [0, 255].
    """
    if a.pixels.shape != b.pixels.shape:
        raise ValidationError(
            f"raster shapes differ: {a.pixels.shape} vs {b.pixels.shape}"
        )
    both = a.mask & b.mask
    only_a = a.mask & ~b.mask
    only_b = b.mask & ~a.mask
    out = np.zeros_like(a.pixels)
    out[both] = 0.5 * (a.pixels[both] + b.pixels[both])
    out[only_a] = a.pixels[only_a]
    out[only_b] = b.pixels[only_b]
    rgba = np.zeros((*a.mask.shape, 4), dtype=np.uint8)
    rgba[..., :3] = np.clip(out, 0.0, 255.0).round().astype(np.uint8)
    rgba[..., 3] = np.where(a.mask | b.mask, 255, 0).astype(np.uint8)
    return rgba
