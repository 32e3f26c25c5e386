"""Sparse quadratic mesh refinement.

Unknowns are the deformed vertex positions V, laid out as
[x0, y0, x1, y1, ...] over row-major vertex ids. Five quadratic energy
terms are assembled as sparse rows and solved jointly by weighted
normal equations:

- point alignment: anchored feature points must land on their matches,
- global alignment: vertices stay near the stage-one prewarp,
- smoothness: triangles keep their prewarp shape up to similarity,
- line correspondence: cut points of matched lines land on the
  reference line,
- collinearity: cut points of unmatched structural lines stay straight.

Anchors live in the ORIGINAL regular target grid, which keeps inverse
bilinear interpolation closed-form; all right-hand sides are expressed
in the post-similarity canvas frame.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SolverFailureError, ValidationError
from .geometry import LineSegment, line_coeffs_from_endpoints
from .mesh import BilinearAnchor, GridMesh, bilinear_anchor, cut_line_by_grid

DEFAULT_WEIGHTS = {"alpha": 1.0, "beta": 0.001, "gamma": 0.01, "delta": 1.0, "rho": 0.001}

POINT_ALIGN = "point_align"
GLOBAL_ALIGN = "global_align"
SMOOTHNESS = "smoothness"
LINE_CORR = "line_corr"
COLLINEARITY = "collinearity"


@dataclass
class EnergyTerm:
    """Sparse rows of one quadratic energy: || A v - b ||^2.

    COO triplets reference the 2 * n_vertices unknowns (x at 2*vid,
    y at 2*vid + 1).
    """

    kind: str
    rows: list = field(default_factory=list)   # row indices
    cols: list = field(default_factory=list)   # unknown indices
    vals: list = field(default_factory=list)
    rhs: list = field(default_factory=list)
    n_rows: int = 0
    skipped: int = 0

    def add_row(self, cols, vals, rhs: float, scale: float = 1.0):
        r = self.n_rows
        for c, v in zip(cols, vals):
            self.rows.append(r)
            self.cols.append(int(c))
            self.vals.append(scale * float(v))
        self.rhs.append(scale * float(rhs))
        self.n_rows += 1

    def matrix(self, n_unknowns: int) -> sp.csr_matrix:
        return sp.csr_matrix(
            (self.vals, (self.rows, self.cols)), shape=(self.n_rows, n_unknowns)
        )

    def rhs_vector(self) -> np.ndarray:
        return np.asarray(self.rhs, dtype=np.float64)

    def energy(self, v: np.ndarray, n_unknowns: int) -> float:
        if self.n_rows == 0:
            return 0.0
        r = self.matrix(n_unknowns) @ v - self.rhs_vector()
        return float(r @ r)


def _anchor_cols_vals(anchor: BilinearAnchor, axis: int):
    cols = 2 * anchor.vertex_ids + axis
    return cols, anchor.weights


def build_point_term(points: np.ndarray, targets: np.ndarray, mesh: GridMesh) -> EnergyTerm:
    """Alignment rows for (M, 2) target points against (M, 2) canvas targets.

    Points outside the mesh are skipped and counted in ``term.skipped``.
    """
    term = EnergyTerm(kind=POINT_ALIGN)
    for p, q in zip(np.atleast_2d(points), np.atleast_2d(targets)):
        if not mesh.contains(p):
            term.skipped += 1
            continue
        a = bilinear_anchor(p, mesh)
        for axis in (0, 1):
            cols, vals = _anchor_cols_vals(a, axis)
            term.add_row(cols, vals, q[axis])
    return term


def build_global_term(prewarp: np.ndarray) -> EnergyTerm:
    """Identity rows anchoring every vertex to its prewarp position."""
    term = EnergyTerm(kind=GLOBAL_ALIGN)
    flat = prewarp.reshape(-1, 2)
    for vid, (x, y) in enumerate(flat):
        term.add_row([2 * vid], [1.0], x)
        term.add_row([2 * vid + 1], [1.0], y)
    return term


def _quad_triangles(mesh: GridMesh, r: int, c: int, mode: str):
    """Vertex-id triples (v1, v2, v3) for one quad.

    'full' walks the quad cycle and emits both windings per corner
    (8 triangles); 'half' splits the quad along one diagonal
    (2 triangles).
    """
    tl = mesh.vertex_index(r, c)
    tr = mesh.vertex_index(r, c + 1)
    br = mesh.vertex_index(r + 1, c + 1)
    bl = mesh.vertex_index(r + 1, c)
    cycle = [tl, tr, br, bl]
    if mode == "half":
        return [(tl, tr, bl), (br, bl, tr)]
    tris = []
    for i, v1 in enumerate(cycle):
        nxt = cycle[(i + 1) % 4]
        prv = cycle[(i - 1) % 4]
        tris.append((v1, nxt, prv))
        tris.append((v1, prv, nxt))
    return tris


def build_smoothness_term(mesh: GridMesh, prewarp: np.ndarray,
                          salience: np.ndarray | None = None,
                          triangles: str = "full") -> EnergyTerm:
    """Shape-preservation rows per triangle of every quad.

    For each triangle, (mu, nu) express vertex 1 in the frame of the
    edge 2->3 of the PREWARP positions (with the 90-degree rotation
    R = [[0, 1], [-1, 0]]); the residual asks the deformed vertex 1 to
    keep those coordinates, which vanishes under any global similarity.
    ``salience`` is a per-cell (rows, cols) weight, default 1.
    """
    term = EnergyTerm(kind=SMOOTHNESS)
    flat = prewarp.reshape(-1, 2)
    for r in range(mesh.rows):
        for c in range(mesh.cols):
            phi = 1.0 if salience is None else float(salience[r, c])
            sphi = np.sqrt(phi)
            for v1, v2, v3 in _quad_triangles(mesh, r, c, triangles):
                e = flat[v3] - flat[v2]
                elen2 = float(e @ e)
                if elen2 < 1e-18:
                    raise ValidationError(f"degenerate prewarp triangle at cell ({r}, {c})")
                d = flat[v1] - flat[v2]
                # solve d = mu * e + nu * R e with R e = (e_y, -e_x)
                mu = (d[0] * e[0] + d[1] * e[1]) / elen2
                nu = (d[0] * e[1] - d[1] * e[0]) / elen2
                # x: V1x - V2x - mu (V3x - V2x) - nu (V3y - V2y) = 0
                term.add_row(
                    [2 * v1, 2 * v2, 2 * v3, 2 * v2 + 1, 2 * v3 + 1],
                    [1.0, -1.0 + mu, -mu, nu, -nu],
                    0.0, scale=sphi,
                )
                # y: V1y - V2y - mu (V3y - V2y) + nu (V3x - V2x) = 0
                term.add_row(
                    [2 * v1 + 1, 2 * v2 + 1, 2 * v3 + 1, 2 * v2, 2 * v3],
                    [1.0, -1.0 + mu, -mu, -nu, nu],
                    0.0, scale=sphi,
                )
    return term


def triangle_coordinates(v1, v2, v3):
    """(mu, nu) of v1 in the rotated frame of edge v2->v3."""
    v1 = np.asarray(v1, dtype=np.float64)
    v2 = np.asarray(v2, dtype=np.float64)
    v3 = np.asarray(v3, dtype=np.float64)
    e = v3 - v2
    elen2 = float(e @ e)
    if elen2 < 1e-18:
        raise ValidationError("degenerate triangle")
    d = v1 - v2
    return (
        (d[0] * e[0] + d[1] * e[1]) / elen2,
        (d[0] * e[1] - d[1] * e[0]) / elen2,
    )


def build_line_corr_term(segments: np.ndarray, ref_coeffs: np.ndarray,
                         mesh: GridMesh, coeffs_per_point=None) -> EnergyTerm:
    """Signed-distance rows from cut points of matched lines.

    ``segments`` is (K, 4) target endpoints; ``ref_coeffs`` (K, 3) the
    corresponding reference lines already expressed in the canvas frame
    and normalized to a^2 + b^2 = 1. One row per cut point.
    ``coeffs_per_point(i, point)`` overrides the coefficients per cut
    point, for callers whose canvas frame varies across mesh cells.
    """
    term = EnergyTerm(kind=LINE_CORR)
    for i, seg_row in enumerate(np.atleast_2d(segments)):
        try:
            seg = LineSegment(seg_row[0:2], seg_row[2:4])
        except ValidationError:
            term.skipped += 1
            continue
        cut = cut_line_by_grid(seg, mesh)
        if len(cut) < 2:
            term.skipped += 1
            continue
        base = np.atleast_2d(ref_coeffs)[i]
        for p in cut:
            a, b, cc = coeffs_per_point(i, p) if coeffs_per_point else base
            norm = np.hypot(a, b)
            a, b, cc = a / norm, b / norm, cc / norm
            anchor = bilinear_anchor(p, mesh)
            cols_x, w = _anchor_cols_vals(anchor, 0)
            cols_y, _ = _anchor_cols_vals(anchor, 1)
            term.add_row(
                np.concatenate([cols_x, cols_y]),
                np.concatenate([a * w, b * w]),
                -cc,
            )
    return term


def collinearity_anchor_sets(segments: np.ndarray, mesh: GridMesh) -> list:
    """Cut-point anchors per constrainable segment.

    Returns [(anchors, original_index)] keeping only segments with at
    least 3 cut points (one interior point to constrain).
    """
    sets = []
    for i, seg_row in enumerate(np.atleast_2d(segments)):
        try:
            seg = LineSegment(np.asarray(seg_row)[0:2], np.asarray(seg_row)[2:4])
        except ValidationError:
            continue
        cut = cut_line_by_grid(seg, mesh)
        if len(cut) < 3:
            continue
        sets.append(([bilinear_anchor(p, mesh) for p in cut], i))
    return sets


def support_line_endpoints(anchors, positions: np.ndarray) -> np.ndarray | None:
    """Line through the warped head and tail cut points; None if degenerate."""
    head = anchors[0].interpolate(positions)
    tail = anchors[-1].interpolate(positions)
    if np.hypot(*(tail - head)) < 1e-9:
        return None
    return line_coeffs_from_endpoints(head, tail)


def support_line_tls(anchors, positions: np.ndarray) -> np.ndarray | None:
    """Total-least-squares line through the warped INTERIOR cut points.

    This is the energy-minimizing support line for fixed vertices, which
    makes re-linearization a descent step. None when the interior points
    do not determine a line (fewer than 2, or coincident).
    """
    pts = np.array([a.interpolate(positions) for a in anchors[1:-1]])
    if pts.shape[0] < 2:
        return None
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    cov = centered.T @ centered
    w, v = np.linalg.eigh(cov)
    if w[-1] < 1e-18:
        return None
    normal = v[:, 0]  # eigenvector of the smaller eigenvalue
    return np.array([normal[0], normal[1], -float(normal @ centroid)])


def _collinearity_rows(term: EnergyTerm, anchors, coeffs: np.ndarray) -> None:
    a, b, cc = coeffs
    norm = np.hypot(a, b)
    a, b, cc = a / norm, b / norm, cc / norm
    for anchor in anchors[1:-1]:
        cols_x, w = _anchor_cols_vals(anchor, 0)
        cols_y, _ = _anchor_cols_vals(anchor, 1)
        term.add_row(
            np.concatenate([cols_x, cols_y]),
            np.concatenate([a * w, b * w]),
            -cc,
        )


def build_collinearity_term(segments: np.ndarray, mesh: GridMesh,
                            prewarp: np.ndarray,
                            support_coeffs: list | None = None) -> EnergyTerm:
    """Straightness rows for target-only lines in the non-overlap region.

    Each segment is cut by the grid; the support line l-hat through the
    PREWARP images of its head and tail cut points is held fixed, and
    every interior cut point is asked to stay on it. Lines with fewer
    than 3 cut points carry no constraint and are skipped.
    ``support_coeffs`` substitutes precomputed support lines (one per
    constrainable segment, None entries fall back to head/tail).
    """
    term = EnergyTerm(kind=COLLINEARITY)
    segments = np.atleast_2d(segments)
    flat = prewarp.reshape(-1, 2)
    sets = collinearity_anchor_sets(segments, mesh)
    term.skipped = segments.shape[0] - len(sets)
    for j, (anchors, _) in enumerate(sets):
        coeffs = None
        if support_coeffs is not None:
            coeffs = support_coeffs[j]
        if coeffs is None:
            coeffs = support_line_endpoints(anchors, flat)
        if coeffs is None:
            term.skipped += 1
            continue
        _collinearity_rows(term, anchors, coeffs)
    return term


@dataclass
class QuadraticSystem:
    terms: dict            # kind -> EnergyTerm
    n_unknowns: int

    def term(self, kind: str) -> EnergyTerm:
        return self.terms[kind]


def term_weight(kind: str, weights: dict) -> float:
    return {
        POINT_ALIGN: weights.get("alpha", DEFAULT_WEIGHTS["alpha"]),
        GLOBAL_ALIGN: weights.get("beta", DEFAULT_WEIGHTS["beta"]),
        SMOOTHNESS: weights.get("gamma", DEFAULT_WEIGHTS["gamma"]),
        LINE_CORR: weights.get("delta", DEFAULT_WEIGHTS["delta"]),
        COLLINEARITY: weights.get("rho", DEFAULT_WEIGHTS["rho"]),
    }[kind]


def solve(system: QuadraticSystem, weights: dict | None = None) -> np.ndarray:
    """Minimize the weighted sum of term energies; returns (n_vertices, 2).

    beta (the global-alignment weight) must stay positive: it is what
    makes the normal equations full rank everywhere.
    """
    weights = {**DEFAULT_WEIGHTS, **(weights or {})}
    if weights["beta"] <= 0:
        raise ValidationError("beta must be positive to anchor the system")
    n = system.n_unknowns
    blocks = []
    rhs_blocks = []
    for kind, term in system.terms.items():
        lam = term_weight(kind, weights)
        if lam == 0.0 or term.n_rows == 0:
            continue
        s = np.sqrt(lam)
        blocks.append(s * term.matrix(n))
        rhs_blocks.append(s * term.rhs_vector())
    A = sp.vstack(blocks, format="csr")
    b = np.concatenate(rhs_blocks)
    AtA = (A.T @ A).tocsc()
    Atb = A.T @ b
    try:
        v = spla.spsolve(AtA, Atb)
    except Exception as exc:  # pragma: no cover - SuperLU failure path
        raise SolverFailureError(f"sparse solve failed: {exc}") from exc
    if not np.all(np.isfinite(v)):
        raise SolverFailureError("sparse solve produced non-finite vertices")
    residual = np.linalg.norm(AtA @ v - Atb)
    if residual > 1e-8 * (1.0 + np.linalg.norm(Atb)):
        raise SolverFailureError(
            f"normal-equation residual {residual:.3e} too large; system ill-conditioned"
        )
    return v.reshape(-1, 2)


def total_energy(system: QuadraticSystem, v: np.ndarray, weights: dict | None = None) -> float:
    weights = {**DEFAULT_WEIGHTS, **(weights or {})}
    flat = np.asarray(v, dtype=np.float64).reshape(-1)
    return sum(
        term_weight(kind, weights) * term.energy(flat, system.n_unknowns)
        for kind, term in system.terms.items()
    )


def build_system(mesh: GridMesh, prewarp: np.ndarray,
                 points: np.ndarray | None = None,
                 point_targets: np.ndarray | None = None,
                 line_segments: np.ndarray | None = None,
                 line_ref_coeffs: np.ndarray | None = None,
                 collinear_segments: np.ndarray | None = None,
                 salience: np.ndarray | None = None,
                 triangles: str = "full",
                 line_coeffs_per_point=None) -> QuadraticSystem:
    """Assemble all five terms for one refinement solve."""
    n_unknowns = 2 * mesh.n_vertices
    terms = {
        GLOBAL_ALIGN: build_global_term(prewarp),
        SMOOTHNESS: build_smoothness_term(mesh, prewarp, salience, triangles),
    }
    if points is not None and len(points):
        terms[POINT_ALIGN] = build_point_term(points, point_targets, mesh)
    if line_segments is not None and len(line_segments):
        terms[LINE_CORR] = build_line_corr_term(line_segments, line_ref_coeffs, mesh,
                                                coeffs_per_point=line_coeffs_per_point)
    if collinear_segments is not None and len(collinear_segments):
        terms[COLLINEARITY] = build_collinearity_term(collinear_segments, mesh, prewarp)
    return QuadraticSystem(terms=terms, n_unknowns=n_unknowns)


def refine(mesh: GridMesh, prewarp: np.ndarray,
           points: np.ndarray | None = None,
           point_targets: np.ndarray | None = None,
           line_segments: np.ndarray | None = None,
           line_ref_coeffs: np.ndarray | None = None,
           collinear_segments: np.ndarray | None = None,
           salience: np.ndarray | None = None,
           weights: dict | None = None,
           triangles: str = "full",
           iterations: int = 1,
           return_energy: bool = False,
           line_coeffs_per_point=None):
    """Refinement driver: solve, optionally re-linearizing collinearity.

    Iteration 1 builds the collinearity support lines from the prewarp
    head/tail cut points and solves once (the plain quadratic problem).
    Each further iteration refits every support line as the
    total-least-squares line through the previous solution's interior
    cut points and re-solves; both half-steps decrease the objective,
    so the iteration's total energy is non-increasing. Returns the final
    (n_vertices, 2) positions, or (positions, energies) when
    ``return_energy`` is set.
    """
    if iterations < 1:
        raise ValidationError(f"iterations must be >= 1, got {iterations}")
    system = build_system(
        mesh, prewarp,
        points=points, point_targets=point_targets,
        line_segments=line_segments, line_ref_coeffs=line_ref_coeffs,
        collinear_segments=collinear_segments,
        salience=salience, triangles=triangles,
        line_coeffs_per_point=line_coeffs_per_point,
    )
    v = solve(system, weights)
    energies = [total_energy(system, v, weights)]
    has_collinear = collinear_segments is not None and len(collinear_segments) > 0
    anchor_sets = collinearity_anchor_sets(collinear_segments, mesh) if has_collinear else []
    prew_flat = np.asarray(prewarp, dtype=np.float64).reshape(-1, 2)
    coeffs = [support_line_endpoints(anchors, prew_flat) for anchors, _ in anchor_sets]
    for _ in range(1, iterations):
        if anchor_sets:
            for j, (anchors, _) in enumerate(anchor_sets):
                refit = support_line_tls(anchors, v)
                if refit is not None:
                    coeffs[j] = refit
            system.terms[COLLINEARITY] = build_collinearity_term(
                collinear_segments, mesh, prewarp, support_coeffs=coeffs
            )
        v = solve(system, weights)
        energies.append(total_energy(system, v, weights))
    if return_energy:
        return v, energies
    return v
