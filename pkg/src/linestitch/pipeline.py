"""End-to-end stitching pipeline and evaluation drivers.

Stage order for a pair: RANSAC filtering, stage-one warp (line-guided
global homography or moving DLT), global similarity constraint, mesh
refinement with line energies, composition, metrics. Multi-image
stitching chains pairwise warps into an anchor frame.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .compositor import (
    WarpedRaster,
    blend_average,
    compute_canvas,
    warp_reference,
    warp_target,
)
from .correspondences import (
    CorrespondenceSet,
    filter_lines_by_model,
    ransac_filter_points,
)
from .dlt import estimate_global_homography
from .errors import InsufficientMatchesError, NumericalError, StitchError
from .geometry import (
    apply_homography_batch,
    line_coeffs_from_endpoints,
    transform_line_coeffs,
)
from .mesh import GridMesh, build_mesh, interpolate_mesh_points
from .mesh_optimizer import refine as refine_mesh
from .metrics import OverlapMask, correlation_metric, mean_geometric_error, metric_report, to_gray
from .moving_dlt import LocalWarpField, constant_field, estimate_local_warp
from .rng import hash_u64
from .similarity import (
    AdjustedWarpPair,
    BlendWeights,
    apply_similarity_constraint,
    compute_blend_weights,
    jacobian_scale,
    select_similarity,
)

log = logging.getLogger(__name__)


@dataclass
class PipelineConfig:
    """All pipeline knobs; defaults follow the published parameter set."""

    mode: str = "local"              # "global" or "local" stage-one warp
    mesh_cells: int = 40             # cells along the shorter image side
    sigma: float = 8.5
    eta: float = 0.01
    alpha: float = 1.0
    beta: float = 0.001
    gamma: float = 0.01
    delta: float = 1.0
    rho: float = 0.001
    similarity: bool = True
    refine: bool = True
    collinearity_iters: int = 1
    ransac_threshold: float = 3.0
    ransac_iters: int = 2000
    filter_lines: bool = False
    line_weight: float = 1.0
    seed: int = 0
    nearest: bool = False
    canvas_cap: int = 64_000_000
    triangles: str = "full"

    def energy_weights(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta, "gamma": self.gamma,
                "delta": self.delta, "rho": self.rho}


@dataclass
class StitchResult:
    image: np.ndarray | None         # (H, W, 4) uint8 blend, None without images
    report: dict
    warped_target: WarpedRaster | None = None
    warped_reference: WarpedRaster | None = None
    debug: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# polygon helpers (target-frame overlap geometry)

def clip_polygon_to_rect(poly: np.ndarray, rect) -> np.ndarray:
    """Sutherland-Hodgman clip of a polygon against an axis-aligned rect."""
    x0, y0, x1, y1 = rect

    def clip_edge(pts, inside, intersect):
        out = []
        n = len(pts)
        for i in range(n):
            a, b = pts[i], pts[(i + 1) % n]
            ia, ib = inside(a), inside(b)
            if ia:
                out.append(a)
                if not ib:
                    out.append(intersect(a, b))
            elif ib:
                out.append(intersect(a, b))
        return out

    def x_cut(c):
        return lambda a, b: a + (b - a) * ((c - a[0]) / (b[0] - a[0]))

    def y_cut(c):
        return lambda a, b: a + (b - a) * ((c - a[1]) / (b[1] - a[1]))

    pts = [np.asarray(p, dtype=np.float64) for p in poly]
    for inside, intersect in (
        (lambda p: p[0] >= x0, x_cut(x0)),
        (lambda p: p[0] <= x1, x_cut(x1)),
        (lambda p: p[1] >= y0, y_cut(y0)),
        (lambda p: p[1] <= y1, y_cut(y1)),
    ):
        if not pts:
            break
        pts = clip_edge(pts, inside, intersect)
    return np.array(pts).reshape(-1, 2)


def polygon_centroid(poly: np.ndarray) -> np.ndarray:
    """Area centroid; falls back to the vertex mean for tiny polygons."""
    p = np.asarray(poly, dtype=np.float64)
    if p.shape[0] < 3:
        return p.mean(axis=0)
    x, y = p[:, 0], p[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * cross.sum()
    if abs(area) < 1e-9:
        return p.mean(axis=0)
    cx = ((x + xn) * cross).sum() / (6.0 * area)
    cy = ((y + yn) * cross).sum() / (6.0 * area)
    return np.array([cx, cy])


def points_in_polygon(pts: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Even-odd rule point-in-polygon test for (N, 2) points."""
    pts = np.atleast_2d(pts)
    poly = np.asarray(poly, dtype=np.float64)
    n = poly.shape[0]
    if n < 3:
        return np.zeros(pts.shape[0], dtype=bool)
    inside = np.zeros(pts.shape[0], dtype=bool)
    x, y = pts[:, 0], pts[:, 1]
    for i in range(n):
        x0, y0 = poly[i]
        x1, y1 = poly[(i + 1) % n]
        crosses = ((y0 > y) != (y1 > y)) & (
            x < (x1 - x0) * (y - y0) / (y1 - y0 + 1e-300) + x0
        )
        inside ^= crosses
    return inside


def overlap_polygon(H_global: np.ndarray, target_size, reference_size) -> np.ndarray:
    """Reference outline pulled into the target frame, clipped to the target.

    May be empty (no overlap) or the whole target rect when the pullback
    is degenerate (horizon crossing).
    """
    w, h = reference_size
    tw, th = target_size
    corners = np.array([[0.0, 0.0], [w - 1.0, 0.0], [w - 1.0, h - 1.0], [0.0, h - 1.0]])
    Hinv = np.linalg.inv(H_global)
    hom = np.column_stack([corners, np.ones(4)]) @ Hinv.T
    if np.any(hom[:, 2] <= 1e-9):
        log.warning("reference outline crosses the horizon; using full target rect")
        return np.array([[0.0, 0.0], [tw - 1.0, 0.0], [tw - 1.0, th - 1.0], [0.0, th - 1.0]])
    poly = hom[:, :2] / hom[:, 2:3]
    return clip_polygon_to_rect(poly, (0.0, 0.0, tw - 1.0, th - 1.0))


# ---------------------------------------------------------------------------
# pipeline pieces

def prewarp_vertices(mesh: GridMesh, cell_warps: np.ndarray) -> np.ndarray:
    """Map each lattice vertex by the mean of its adjacent cells' warps."""
    verts = mesh.vertex_array()
    out = np.zeros_like(verts)
    counts = np.zeros(len(verts))
    for r in range(mesh.rows):
        for c in range(mesh.cols):
            ids = [
                mesh.vertex_index(r, c), mesh.vertex_index(r, c + 1),
                mesh.vertex_index(r + 1, c), mesh.vertex_index(r + 1, c + 1),
            ]
            mapped = apply_homography_batch(cell_warps[r, c], verts[ids])
            out[ids] += mapped
            counts[ids] += 1.0
    return out / counts[:, None]


def cell_salience(image: np.ndarray | None, mesh: GridMesh) -> np.ndarray | None:
    """Per-cell gray variance mapped linearly to [0.5, 2.0]; None without image."""
    if image is None:
        return None
    gray = to_gray(image)
    var = np.zeros((mesh.rows, mesh.cols))
    for r in range(mesh.rows):
        for c in range(mesh.cols):
            y0, y1 = int(np.floor(mesh.ys[r])), int(np.ceil(mesh.ys[r + 1])) + 1
            x0, x1 = int(np.floor(mesh.xs[c])), int(np.ceil(mesh.xs[c + 1])) + 1
            patch = gray[max(0, y0):y1, max(0, x0):x1]
            var[r, c] = patch.var() if patch.size else 0.0
    lo, hi = var.min(), var.max()
    if hi - lo < 1e-12:
        return np.ones_like(var)
    return 0.5 + 1.5 * (var - lo) / (hi - lo)


def _identity_pair(field: LocalWarpField) -> AdjustedWarpPair:
    rows, cols = field.mesh.rows, field.mesh.cols
    H = field.homographies.copy()
    ident = np.broadcast_to(np.eye(3), (rows, cols, 3, 3)).copy()
    return AdjustedWarpPair(target_warps=H, reference_warps=ident)


def _map_point_targets(cs_points: np.ndarray, mesh: GridMesh,
                       pair: AdjustedWarpPair) -> np.ndarray:
    """Reference points expressed in the canvas frame via their cell's T'."""
    out = np.empty((cs_points.shape[0], 2))
    for i, row in enumerate(cs_points):
        r, c = mesh.cell_of_point(np.clip(row[0:2], [0, 0],
                                          [mesh.xs[-1], mesh.ys[-1]]))
        T = pair.reference_warps[r, c]
        out[i] = apply_homography_batch(T, row[2:4].reshape(1, 2))[0]
    return out


def _line_coeffs_mapper(cs_lines: np.ndarray, mesh: GridMesh, pair: AdjustedWarpPair):
    """Per-evaluation-point canvas-frame reference-line coefficients.

    The reference renders piecewise (one T' per cell), so a line's
    canvas-frame coefficients depend on WHERE along the target line they
    are evaluated: each point uses the T' of its own cell.
    """
    base = [line_coeffs_from_endpoints(row[4:6], row[6:8]) for row in cs_lines]
    lo = np.array([mesh.xs[0], mesh.ys[0]])
    hi = np.array([mesh.xs[-1], mesh.ys[-1]])

    def mapper(i: int, point) -> np.ndarray:
        r, c = mesh.cell_of_point(np.clip(np.asarray(point, dtype=np.float64), lo, hi))
        return transform_line_coeffs(pair.reference_warps[r, c], base[i])

    return mapper


def _map_line_coeffs(cs_lines: np.ndarray, mesh: GridMesh,
                     pair: AdjustedWarpPair) -> np.ndarray:
    """(2K, 3) canvas-frame line coefficients per target ENDPOINT.

    Rows 0..K-1 belong to the head endpoints, rows K..2K-1 to the tails,
    matching the endpoint stacking of the geometric-error metric.
    """
    mapper = _line_coeffs_mapper(cs_lines, mesh, pair)
    k = cs_lines.shape[0]
    out = np.empty((2 * k, 3))
    for i, row in enumerate(cs_lines):
        out[i] = mapper(i, row[0:2])
        out[k + i] = mapper(i, row[2:4])
    return out


@dataclass
class PairGeometry:
    """Everything stitch_pair derives before rendering."""

    mesh: GridMesh
    H_global: np.ndarray
    field: LocalWarpField
    pair: AdjustedWarpPair
    weights: BlendWeights
    prewarp: np.ndarray             # (n_vertices, 2) world frame
    vertices: np.ndarray            # refined (or prewarp) vertex positions
    inlier_points: np.ndarray       # (Mi, 4)
    lines: np.ndarray               # (K, 8) possibly filtered
    point_targets: np.ndarray       # (Mi, 2) canvas frame
    line_coeffs_canvas: np.ndarray  # (K, 3)
    overlap_poly: np.ndarray
    similarity: object | None

    def warp_points(self, pts: np.ndarray) -> np.ndarray:
        """Final warp: mesh interpolation inside, clamped-cell H' outside."""
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        out = np.empty_like(pts)
        inside = np.array([self.mesh.contains(p) for p in pts])
        if inside.any():
            out[inside] = interpolate_mesh_points(self.mesh, self.vertices, pts[inside])
        for i in np.nonzero(~inside)[0]:
            p = pts[i]
            clamped = np.clip(p, [0, 0], [self.mesh.xs[-1], self.mesh.ys[-1]])
            r, c = self.mesh.cell_of_point(clamped)
            out[i] = apply_homography_batch(self.pair.target_warps[r, c], p.reshape(1, 2))[0]
        return out


def compute_pair_geometry(cs: CorrespondenceSet, config: PipelineConfig,
                          target_image: np.ndarray | None = None) -> PairGeometry:
    """Run every pipeline stage up to (but excluding) rasterization."""
    points = cs.points
    lines = cs.lines
    model = None
    if points.shape[0] >= 4:
        res = ransac_filter_points(points, threshold=config.ransac_threshold,
                                   max_iters=config.ransac_iters, seed=config.seed)
        points = res.inliers
        model = res.model
        if res.outliers.shape[0]:
            log.info("RANSAC removed %d point matches", res.outliers.shape[0])
    if config.filter_lines and model is not None and lines.shape[0]:
        lines, dropped = filter_lines_by_model(lines, model)
        if dropped.shape[0]:
            log.info("line filter removed %d line matches", dropped.shape[0])

    mesh = build_mesh(cs.target_size, config.mesh_cells)
    try:
        H_global = estimate_global_homography(points, lines, line_weight=config.line_weight)
    except StitchError as exc:
        raise type(exc)(f"stage-one global estimation: {exc}") from exc

    if config.mode == "local":
        try:
            field = estimate_local_warp(points, lines, mesh, sigma=config.sigma,
                                        eta=config.eta, line_weight_scale=config.line_weight)
        except StitchError as exc:
            raise type(exc)(f"stage-one local estimation: {exc}") from exc
    elif config.mode == "global":
        field = constant_field(mesh, H_global, sigma=config.sigma, eta=config.eta)
    else:
        raise InsufficientMatchesError(f"unknown mode {config.mode!r}")

    poly = overlap_polygon(H_global, cs.target_size, cs.reference_size)
    similarity = None
    if config.similarity and points.shape[0] >= 2:
        try:
            cand = select_similarity(points, threshold=config.ransac_threshold,
                                     seed=hash_u64(config.seed, 77))
            similarity = cand.transform
        except StitchError as exc:
            log.warning("similarity selection failed (%s); constraint disabled", exc)
    if similarity is not None:
        rw, rh = cs.reference_size
        ref_center_hom = np.linalg.inv(H_global) @ np.array([(rw - 1) / 2.0, (rh - 1) / 2.0, 1.0])
        if abs(ref_center_hom[2]) > 1e-9:
            ref_center = ref_center_hom[:2] / ref_center_hom[2]
        else:
            ref_center = np.array(cs.target_size, dtype=np.float64) / 2.0
        centroid = polygon_centroid(poly) if poly.shape[0] >= 3 else ref_center
        weights = compute_blend_weights(mesh, H_global, ref_center, centroid)
        pair = apply_similarity_constraint(field, similarity, weights)
    else:
        weights = BlendWeights(
            tau=np.ones((mesh.rows, mesh.cols)), xi=np.zeros((mesh.rows, mesh.cols))
        )
        pair = _identity_pair(field)

    prewarp = prewarp_vertices(mesh, pair.target_warps)
    point_targets = (
        _map_point_targets(points, mesh, pair) if points.shape[0] else np.empty((0, 2))
    )
    line_coeffs = (
        _map_line_coeffs(lines, mesh, pair) if lines.shape[0] else np.empty((0, 3))
    )

    vertices = prewarp
    if config.refine:
        collinear = np.empty((0, 4))
        if lines.shape[0]:
            mids = 0.5 * (lines[:, 0:2] + lines[:, 2:4])
            outside = ~points_in_polygon(mids, poly)
            collinear = lines[outside][:, 0:4]
        vertices = refine_mesh(
            mesh, prewarp,
            points=points[:, 0:2] if points.shape[0] else None,
            point_targets=point_targets if points.shape[0] else None,
            line_segments=lines[:, 0:4] if lines.shape[0] else None,
            line_ref_coeffs=np.array(
                [line_coeffs_from_endpoints(r[4:6], r[6:8]) for r in lines]
            ).reshape(-1, 3) if lines.shape[0] else None,
            collinear_segments=collinear if collinear.shape[0] else None,
            salience=cell_salience(target_image, mesh),
            weights=config.energy_weights(),
            triangles=config.triangles,
            iterations=config.collinearity_iters,
            line_coeffs_per_point=(
                _line_coeffs_mapper(lines, mesh, pair) if lines.shape[0] else None
            ),
        )

    return PairGeometry(
        mesh=mesh, H_global=H_global, field=field, pair=pair, weights=weights,
        prewarp=prewarp, vertices=vertices, inlier_points=points, lines=lines,
        point_targets=point_targets, line_coeffs_canvas=line_coeffs,
        overlap_poly=poly, similarity=similarity,
    )


def geometry_metrics(geom: PairGeometry) -> tuple[float, float, float]:
    """Err_p / Err_l / Err_mg of the final warp on the used correspondences."""
    return mean_geometric_error(
        geom.warp_points,
        geom.inlier_points[:, 0:2], geom.point_targets,
        geom.lines[:, 0:4] if geom.lines.shape[0] else np.empty((0, 4)),
        geom.line_coeffs_canvas,
    )


def distortion_diagnostic(geom: PairGeometry) -> float:
    """Mean |log local scale change| over the non-overlap cells."""
    centers = geom.mesh.cell_centers().reshape(-1, 2)
    outside = ~points_in_polygon(centers, geom.overlap_poly)
    if not outside.any():
        return 0.0
    vals = []
    for idx in np.nonzero(outside)[0]:
        r, c = divmod(int(idx), geom.mesh.cols)
        H = geom.pair.target_warps[r, c]
        try:
            s = jacobian_scale(H, centers[idx])
        except NumericalError:
            continue
        if s > 0:
            vals.append(abs(np.log(s)))
    return float(np.mean(vals)) if vals else 0.0


def stitch_pair(target_image: np.ndarray | None, reference_image: np.ndarray | None,
                cs: CorrespondenceSet, config: PipelineConfig | None = None,
                want_debug: bool = False) -> StitchResult:
    """Full pipeline for one image pair; images may be None for metrics-only runs."""
    config = config or PipelineConfig()
    geom = compute_pair_geometry(cs, config, target_image)
    err_p, err_l, err_mg = geometry_metrics(geom)

    image = None
    warped_t = warped_r = None
    cor = None
    n_overlap = 0
    if target_image is not None and reference_image is not None:
        rw, rh = cs.reference_size
        edge = np.linspace(0.0, 1.0, 64)
        perimeter = np.vstack([
            np.column_stack([edge * (rw - 1), np.zeros_like(edge)]),
            np.column_stack([np.full_like(edge, rw - 1.0), edge * (rh - 1)]),
            np.column_stack([(1 - edge) * (rw - 1), np.full_like(edge, rh - 1.0)]),
            np.column_stack([np.zeros_like(edge), (1 - edge) * (rh - 1)]),
        ])
        ref_outline = np.empty_like(perimeter)
        Hinv = np.linalg.inv(geom.H_global)
        for i, p in enumerate(perimeter):
            hom = Hinv @ np.array([p[0], p[1], 1.0])
            t = hom[:2] / hom[2] if abs(hom[2]) > 1e-9 else np.array([0.0, 0.0])
            t = np.clip(t, [geom.mesh.xs[0], geom.mesh.ys[0]],
                        [geom.mesh.xs[-1], geom.mesh.ys[-1]])
            r, c = geom.mesh.cell_of_point(t)
            ref_outline[i] = apply_homography_batch(
                geom.pair.reference_warps[r, c], p.reshape(1, 2))[0]
        canvas = compute_canvas(geom.vertices, ref_outline, cap=config.canvas_cap)
        warped_t = warp_target(np.asarray(target_image, dtype=np.float64), geom.mesh,
                               geom.vertices, canvas, nearest=config.nearest)
        warped_r = warp_reference(np.asarray(reference_image, dtype=np.float64),
                                  geom.mesh, geom.field.homographies,
                                  geom.pair.reference_warps, geom.H_global, canvas,
                                  nearest=config.nearest)
        image = blend_average(warped_t, warped_r)
        overlap = OverlapMask(warped_t.mask & warped_r.mask)
        n_overlap = overlap.count
        if overlap.shrunk().any():
            cor = correlation_metric(warped_t.pixels, warped_r.pixels, overlap)

    report = metric_report(cor, err_p, err_l, err_mg, n_overlap,
                           geom.inlier_points.shape[0], geom.lines.shape[0])
    debug = {}
    if want_debug:
        debug = {
            "H_global": geom.H_global,
            "prewarp_vertices": geom.prewarp,
            "optimized_vertices": geom.vertices,
            "blend_tau": geom.weights.tau,
            "blend_xi": geom.weights.xi,
            "cell_homographies": geom.pair.target_warps,
            "reference_adjustments": geom.pair.reference_warps,
            "overlap_polygon": geom.overlap_poly,
            "similarity": geom.similarity,
            "distortion_diagnostic": distortion_diagnostic(geom),
        }
    return StitchResult(image=image, report=report, warped_target=warped_t,
                        warped_reference=warped_r, debug=debug)


# ---------------------------------------------------------------------------
# multi-image chaining

def _swap_set(cs: CorrespondenceSet) -> CorrespondenceSet:
    pts = cs.points[:, [2, 3, 0, 1]] if cs.points.size else cs.points
    lns = cs.lines[:, [4, 5, 6, 7, 0, 1, 2, 3]] if cs.lines.size else cs.lines
    return CorrespondenceSet(pts, lns, cs.reference_size, cs.target_size)


def stitch_sequence(images: list, pair_sets: list, anchor: int = 0,
                    config: PipelineConfig | None = None) -> StitchResult:
    """Sequential multi-image stitching into the anchor image's frame.

    ``pair_sets[k]`` relates images[k] (reference side) to images[k+1]
    (target side). Images on either side of the anchor are chained
    through their pairwise warps; the similarity constraint is disabled
    in this mode so the anchor frame stays fixed.
    """
    config = replace(config or PipelineConfig(), similarity=False)
    n = len(images)
    if len(pair_sets) != n - 1:
        raise InsufficientMatchesError(
            f"need {n - 1} correspondence sets for {n} images, got {len(pair_sets)}"
        )
    if not (0 <= anchor < n):
        raise InsufficientMatchesError(f"anchor {anchor} out of range")

    # pairwise geometry, oriented so each non-anchor image warps toward the anchor
    geoms: dict[int, PairGeometry] = {}
    for m in range(anchor + 1, n):
        geoms[m] = compute_pair_geometry(pair_sets[m - 1], config, images[m])
    for m in range(anchor - 1, -1, -1):
        geoms[m] = compute_pair_geometry(_swap_set(pair_sets[m]), config, images[m])

    def chain(m: int):
        """Composition of pairwise warps from image m into the anchor frame."""
        order = range(m, anchor, -1) if m > anchor else range(m, anchor)

        def f(pts):
            cur = np.atleast_2d(np.asarray(pts, dtype=np.float64))
            for k in order:
                cur = geoms[k].warp_points(cur)
            return cur
        return f

    # canvas bounds from every image's warped outline
    outlines = []
    per_image_vertices = []
    for m in range(n):
        h, w = np.asarray(images[m]).shape[:2]
        mesh = build_mesh((w, h), config.mesh_cells)
        verts = mesh.vertex_array()
        mapped = chain(m)(verts) if m != anchor else verts
        outlines.append(mapped)
        per_image_vertices.append((mesh, mapped))
    canvas = compute_canvas(*outlines, cap=config.canvas_cap)

    acc = None
    count = None
    for m in range(n):
        mesh, mapped = per_image_vertices[m]
        raster = warp_target(np.asarray(images[m], dtype=np.float64), mesh, mapped,
                             canvas, nearest=config.nearest)
        if acc is None:
            acc = np.zeros_like(raster.pixels)
            count = np.zeros(raster.mask.shape, dtype=np.int64)
        acc[raster.mask] += raster.pixels[raster.mask]
        count += raster.mask
    valid = count > 0
    out = np.zeros_like(acc)
    out[valid] = acc[valid] / count[valid][:, None]
    rgba = np.zeros((*valid.shape, 4), dtype=np.uint8)
    rgba[..., :3] = np.clip(out, 0, 255).round().astype(np.uint8)
    rgba[..., 3] = np.where(valid, 255, 0)

    # per-pair geometric error measured in the anchor frame
    pair_errors = []
    for k in range(n - 1):
        tgt_idx, ref_idx = k + 1, k
        geom = geoms[tgt_idx] if tgt_idx > anchor else None
        cs = pair_sets[k]
        if tgt_idx <= anchor:
            cs = _swap_set(cs)
            tgt_idx, ref_idx = k, k + 1
        f_tgt = chain(tgt_idx)
        f_ref = chain(ref_idx)
        pts = cs.points
        if pts.shape[0] == 0:
            continue
        mapped_t = f_tgt(pts[:, 0:2])
        mapped_r = f_ref(pts[:, 2:4])
        err_p = float(np.linalg.norm(mapped_t - mapped_r, axis=1).mean())
        err_l = 0.0
        if cs.lines.shape[0]:
            ends = np.vstack([cs.lines[:, 0:2], cs.lines[:, 2:4]])
            mapped_e = f_tgt(ends)
            dists = []
            for i, row in enumerate(cs.lines):
                r0 = f_ref(row[4:6].reshape(1, 2))[0]
                r1 = f_ref(row[6:8].reshape(1, 2))[0]
                coeffs = line_coeffs_from_endpoints(r0, r1)
                for e in (mapped_e[i], mapped_e[i + cs.lines.shape[0]]):
                    dists.append(abs(coeffs[0] * e[0] + coeffs[1] * e[1] + coeffs[2]))
            err_l = float(np.mean(dists))
        m_count = pts.shape[0]
        k_count = cs.lines.shape[0]
        err_mg = (err_p * m_count + err_l * 2 * k_count) / (m_count + 2 * k_count)
        pair_errors.append({"pair": [k, k + 1], "err_p": err_p, "err_l": err_l,
                            "err_mg": err_mg})

    worst = max((p["err_mg"] for p in pair_errors), default=0.0)
    report = {
        "pairs": pair_errors,
        "worst_err_mg": worst,
        "n_images": n,
        "anchor": anchor,
        "canvas": [canvas.width, canvas.height],
    }
    return StitchResult(image=rgba, report=report)


# ---------------------------------------------------------------------------
# evaluation suites

def evaluate_scene(cs: CorrespondenceSet, config: PipelineConfig) -> dict:
    """Geometry-only evaluation of one scene under one config."""
    geom = compute_pair_geometry(cs, config)
    err_p, err_l, err_mg = geometry_metrics(geom)
    return {
        "err_p": err_p,
        "err_l": err_l,
        "err_mg": err_mg,
        "distortion": distortion_diagnostic(geom),
    }


def evaluate(suite: str, seeds: int = 20, base: PipelineConfig | None = None) -> dict:
    """Compare two configurations over a synthetic scene suite.

    Suites:
      line-ablation          line-guided vs points-only local warping
      refine-gain            mesh refinement on vs off
      similarity-diagnostic  similarity constraint on vs off
    """
    from .synth import generate, perspective_scene, single_plane_scene

    base = base or PipelineConfig()
    rows = []
    if suite == "line-ablation":
        # stage-one local warping with vs without line guidance; both are
        # measured on ALL observed matches (similarity off keeps the
        # canvas frame equal to the reference frame for both).
        cfg = replace(base, mode="local", similarity=False, refine=False)
        for seed in range(seeds):
            scene = single_plane_scene(seed=hash_u64(1000, seed), n_points=6, n_lines=30,
                                       noise_sigma=1.0)
            cs, _ = generate(scene)
            err_on = evaluate_scene(cs, cfg)["err_mg"]
            geom_off = compute_pair_geometry(
                CorrespondenceSet(cs.points, np.empty((0, 8)), cs.target_size,
                                  cs.reference_size),
                cfg,
            )
            _, _, err_off = mean_geometric_error(
                geom_off.warp_points,
                geom_off.inlier_points[:, 0:2], geom_off.point_targets,
                cs.lines[:, 0:4], cs.reference_segment_coeffs(),
            )
            rows.append({"seed": seed, "a": err_on, "b": err_off})
        return {"suite": suite, "label_a": "line-guided", "label_b": "points-only",
                "metric": "err_mg", "rows": rows,
                "a_wins": sum(r["a"] < r["b"] for r in rows)}
    if suite == "refine-gain":
        cfg_on = replace(base, similarity=False, refine=True)
        cfg_off = replace(base, similarity=False, refine=False)
        for seed in range(seeds):
            scene = single_plane_scene(seed=hash_u64(2000, seed), n_points=30, n_lines=15,
                                       noise_sigma=1.0)
            cs, _ = generate(scene)
            rows.append({
                "seed": seed,
                "a": evaluate_scene(cs, cfg_on)["err_mg"],
                "b": evaluate_scene(cs, cfg_off)["err_mg"],
            })
        return {"suite": suite, "label_a": "refined", "label_b": "stage-one",
                "metric": "err_mg", "rows": rows,
                "a_wins": sum(r["a"] < r["b"] for r in rows)}
    if suite == "similarity-diagnostic":
        cfg_on = replace(base, similarity=True, refine=True)
        cfg_off = replace(base, similarity=False, refine=True)
        for seed in range(seeds):
            scene = perspective_scene(seed=hash_u64(3000, seed))
            cs, _ = generate(scene)
            on = evaluate_scene(cs, cfg_on)
            off = evaluate_scene(cs, cfg_off)
            rows.append({"seed": seed,
                         "a": on["distortion"], "b": off["distortion"],
                         "err_a": on["err_mg"], "err_b": off["err_mg"]})
        return {"suite": suite, "label_a": "similarity-on", "label_b": "similarity-off",
                "metric": "mean |log scale|", "rows": rows,
                "a_wins": sum(r["a"] < r["b"] for r in rows)}
    raise InsufficientMatchesError(f"unknown evaluation suite {suite!r}")
