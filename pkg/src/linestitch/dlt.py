"""Joint homography estimation from point and line correspondences.

Each point match contributes the two independent rows of the classic
cross-product DLT constraint; each line match contributes one incidence
row per target endpoint, expressing that the mapped endpoint must lie on
the corresponding reference line. The stacked system is solved for the
right singular vector with the smallest singular value, on coordinates
normalized per image side (centroid at the origin, mean norm sqrt(2)).

Layout of the 9-vector h is row-major: H = [[h1,h2,h3],[h4,h5,h6],[h7,h8,h9]].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateSeparationError,
    InsufficientMatchesError,
    RankDeficiencyError,
    ValidationError,
)
from .geometry import normalize_correspondences, normalize_homography

KIND_POINT = 0
KIND_LINE = 1


def point_rows(points: np.ndarray) -> np.ndarray:
    """Constraint rows for point matches, shape (2M, 9).

    ``points`` is (M, 4) as [x, y, x', y']. Row pair per match:
      [0,0,0, -x,-y,-1, y'x, y'y, y']
      [x,y,1,  0, 0, 0, -x'x, -x'y, -x']
    Both vanish on vec(H) exactly when p' = Hp exactly.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 4)
    m = pts.shape[0]
    x, y, xp, yp = pts[:, 0], pts[:, 1], pts[:, 2], pts[:, 3]
    zeros = np.zeros(m)
    ones = np.ones(m)
    rows = np.empty((2 * m, 9))
    rows[0::2] = np.column_stack([zeros, zeros, zeros, -x, -y, -ones, yp * x, yp * y, yp])
    rows[1::2] = np.column_stack([x, y, ones, zeros, zeros, zeros, -xp * x, -xp * y, -xp])
    return rows


def _segment_coeffs(endpoints: np.ndarray) -> np.ndarray:
    """Normalized implicit coefficients per (N, 4) segment row."""
    p0 = np.hstack([endpoints[:, 0:2], np.ones((endpoints.shape[0], 1))])
    p1 = np.hstack([endpoints[:, 2:4], np.ones((endpoints.shape[0], 1))])
    l = np.cross(p0, p1)
    norm = np.hypot(l[:, 0], l[:, 1])
    if np.any(norm < 1e-12):
        raise RankDeficiencyError("degenerate line segment in correspondence set")
    return l / norm[:, None]


def line_rows(lines: np.ndarray) -> np.ndarray:
    """Constraint rows for line matches, shape (2K, 9).

    ``lines`` is (K, 8) as [x0,y0,x1,y1, x0',y0',x1',y1']. The reference
    implicit line (a',b',c') comes from the reference endpoints; each
    target endpoint (x,y) contributes
      [a'x, a'y, a', b'x, b'y, b', c'x, c'y, c']
    which is l'^T H [x,y,1]^T written out over vec(H).
    """
    segs = np.asarray(lines, dtype=np.float64).reshape(-1, 8)
    coeffs = _segment_coeffs(segs[:, 4:8])
    k = segs.shape[0]
    rows = np.empty((2 * k, 9))
    for slot, (ex, ey) in enumerate(((0, 1), (2, 3))):
        x, y = segs[:, ex], segs[:, ey]
        a, b, c = coeffs[:, 0], coeffs[:, 1], coeffs[:, 2]
        ones = np.ones(k)
        rows[slot::2] = np.column_stack(
            [a * x, a * y, a, b * x, b * y, b, c * x, c * y, c]
        )
    return rows


@dataclass
class StackedSystem:
    """Normalized constraint matrix plus what is needed to denormalize.

    ``row_kind`` and ``row_source`` tag each row with its constraint type
    and originating correspondence, so per-location weighting can expand
    per-correspondence weights onto rows. ``target_points`` and
    ``target_segments`` hold the ORIGINAL (unnormalized) target-side
    geometry used for distance-based weights.
    """

    C: np.ndarray                 # (2M + 2K, 9)
    row_kind: np.ndarray          # (R,) KIND_POINT / KIND_LINE
    row_source: np.ndarray        # (R,) correspondence index within its kind
    T_target: np.ndarray          # 3x3 normalization of the target side
    T_reference: np.ndarray       # 3x3 normalization of the reference side
    target_points: np.ndarray     # (M, 2) original target keypoints
    target_segments: np.ndarray   # (K, 4) original target segment endpoints

    @property
    def n_points(self) -> int:
        return self.target_points.shape[0]

    @property
    def n_lines(self) -> int:
        return self.target_segments.shape[0]

    def denormalize(self, h: np.ndarray) -> np.ndarray:
        H = h.reshape(3, 3)
        return normalize_homography(np.linalg.inv(self.T_reference) @ H @ self.T_target)


def build_stacked_system(points, lines=None, line_weight: float = 1.0) -> StackedSystem:
    """Assemble the normalized (2M+2K) x 9 system for a correspondence set.

    Both image sides are normalized; reference-side line coefficients are
    recomputed from the normalized reference endpoints, which transforms
    them consistently and keeps a'^2 + b'^2 = 1. ``line_weight`` scales
    the line rows relative to the point rows (default: equal).
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 4)
    segs = (
        np.asarray(lines, dtype=np.float64).reshape(-1, 8)
        if lines is not None
        else np.empty((0, 8))
    )
    m, k = pts.shape[0], segs.shape[0]
    if 2 * m + 2 * k < 8:
        raise InsufficientMatchesError(
            f"need 2M + 2K >= 8 constraint rows, got M={m} points, K={k} lines"
        )

    tgt_ends = segs[:, 0:4].reshape(-1, 2)
    ref_ends = segs[:, 4:8].reshape(-1, 2)
    T, pts_t, ends_t = normalize_correspondences(pts[:, 0:2], tgt_ends)
    Tp, pts_r, ends_r = normalize_correspondences(pts[:, 2:4], ref_ends)

    blocks = []
    if m:
        blocks.append(point_rows(np.hstack([pts_t, pts_r])))
    if k:
        seg_norm = np.hstack([ends_t.reshape(-1, 4), ends_r.reshape(-1, 4)])
        blocks.append(line_weight * line_rows(seg_norm))
    C = np.vstack(blocks)

    row_kind = np.concatenate([np.zeros(2 * m, dtype=np.int8), np.ones(2 * k, dtype=np.int8)])
    row_source = np.concatenate([np.repeat(np.arange(m), 2), np.repeat(np.arange(k), 2)])
    return StackedSystem(
        C=C,
        row_kind=row_kind,
        row_source=row_source,
        T_target=T,
        T_reference=Tp,
        target_points=pts[:, 0:2].copy(),
        target_segments=segs[:, 0:4].copy(),
    )


def smallest_singular_vector(C: np.ndarray) -> np.ndarray:
    """Unit h minimizing ||C h|| via a full SVD of the stacked matrix.

    Raises when the system is rank deficient below 8 or when the two
    smallest singular values are not separated (solution ambiguous).
    The minimal 8-row case needs full_matrices to expose the null
    direction; either way vt comes back 9x9.
    """
    _, s, vt = np.linalg.svd(C, full_matrices=C.shape[0] < 9)
    s = np.concatenate([s, np.zeros(9 - len(s))])
    if s[0] <= 0 or s[7] / s[0] < 1e-12:
        raise RankDeficiencyError("constraint matrix has rank < 8")
    if (s[7] - s[8]) / s[0] <= 1e-10:
        raise DegenerateSeparationError(
            "smallest singular values nearly equal; configuration is degenerate"
        )
    return vt[-1]


def estimate_global_homography(points, lines=None, line_weight: float = 1.0) -> np.ndarray:
    """Line-guided global homography from M point and K line matches.

    Returns the denormalized, scale-normalized 3x3 estimate minimizing
    the stacked algebraic cost on normalized coordinates.
    """
    system = build_stacked_system(points, lines, line_weight=line_weight)
    return system.denormalize(smallest_singular_vector(system.C))


def estimate_homography_4pt(points: np.ndarray) -> np.ndarray | None:
    """Minimal-sample DLT used inside RANSAC; None on degeneracy.

    Unlike the estimator above this never raises: degenerate samples are
    a normal event during random sampling.
    """
    try:
        system = build_stacked_system(points)
        return system.denormalize(smallest_singular_vector(system.C))
    except (RankDeficiencyError, DegenerateSeparationError, ValidationError,
            np.linalg.LinAlgError):
        return None
