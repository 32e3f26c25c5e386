"""Global similarity estimation, selection, and projective/similarity blending.

The distortion-reduction stage: estimate a 4-DoF similarity from the
point group with the smallest rotation angle, derive the direction along
which projective scale change varies (the u-axis, from the perspective
row of the homography), ramp blend weights along it, and mix the
similarity into every cell's homography. The reference image receives
the compensating per-cell adjustment T' = H' H^-1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    HorizonError,
    InsufficientMatchesError,
    NoConsensusError,
    NumericalError,
    ValidationError,
)
from .geometry import SimilarityTransform, normalize_homography
from .mesh import GridMesh
from .moving_dlt import LocalWarpField
from .rng import hash_u64, sample_without_replacement


def estimate_similarity(matches: np.ndarray) -> SimilarityTransform:
    """Least-squares 4-DoF fit of (M, 4) point matches.

    Parameterized as x' = a x - b y + tx, y' = b x + a y + ty with
    scale = hypot(a, b) and theta = atan2(b, a); linear in (a, b, tx, ty).
    """
    pts = np.asarray(matches, dtype=np.float64).reshape(-1, 4)
    n = pts.shape[0]
    if n < 2:
        raise InsufficientMatchesError(f"similarity needs >= 2 matches, got {n}")
    x, y = pts[:, 0], pts[:, 1]
    A = np.zeros((2 * n, 4))
    A[0::2, 0] = x
    A[0::2, 1] = -y
    A[0::2, 2] = 1.0
    A[1::2, 0] = y
    A[1::2, 1] = x
    A[1::2, 3] = 1.0
    b = pts[:, 2:4].ravel()
    s = np.linalg.svd(A, compute_uv=False)
    if s[-1] / s[0] < 1e-10:
        raise ValidationError("degenerate similarity fit: target points coincide")
    sol, *_ = np.linalg.lstsq(A, b, rcond=None)
    a, bb, tx, ty = (float(v) for v in sol)
    scale = math.hypot(a, bb)
    if scale < 1e-12:
        raise NumericalError("similarity collapsed to zero scale")
    return SimilarityTransform(scale=scale, theta=math.atan2(bb, a), tx=tx, ty=ty)


@dataclass
class SimilarityCandidate:
    transform: SimilarityTransform
    inlier_indices: np.ndarray  # indices into the ORIGINAL match array
    rotation_angle_abs: float


def _similarity_ransac(pts: np.ndarray, threshold: float, seed: int,
                       max_iters: int = 1000) -> np.ndarray | None:
    """Best inlier mask from 2-point similarity samples; None if hopeless."""
    n = pts.shape[0]
    best_mask = None
    best_count = 1
    for it in range(max_iters):
        pick = sample_without_replacement(seed, 2 * it, n, 2)
        pair = pts[pick]
        try:
            model = estimate_similarity(pair)
        except (ValidationError, NumericalError):
            continue
        err = np.linalg.norm(model.apply(pts[:, 0:2]) - pts[:, 2:4], axis=1)
        mask = err < threshold
        count = int(mask.sum())
        if count > best_count:
            best_count = count
            best_mask = mask
            if count == n:
                break
    return best_mask


def select_similarity(matches: np.ndarray, threshold: float = 3.0,
                      seed: int = 0, max_iters: int = 1000) -> SimilarityCandidate:
    """Segment point matches into similarity-consistent groups; pick the
    group whose refit similarity has the smallest |rotation angle|.

    Groups are peeled off iteratively: RANSAC, refit on its inliers,
    remove them, and continue while at least max(10, 5% of M) matches
    remain. Deterministic in the seed.
    """
    pts = np.asarray(matches, dtype=np.float64).reshape(-1, 4)
    m = pts.shape[0]
    if m < 2:
        raise InsufficientMatchesError(f"group selection needs >= 2 matches, got {m}")
    min_keep = max(10, math.ceil(0.05 * m))
    remaining = np.arange(m)
    candidates: list[SimilarityCandidate] = []
    round_id = 0
    while remaining.size >= 2:
        mask = _similarity_ransac(pts[remaining], threshold, hash_u64(seed, round_id), max_iters)
        if mask is None or mask.sum() < 2:
            break
        refit = estimate_similarity(pts[remaining][mask])
        err = np.linalg.norm(refit.apply(pts[remaining][:, 0:2]) - pts[remaining][:, 2:4], axis=1)
        final_mask = err < threshold
        if final_mask.sum() < 2:
            final_mask = mask
        group = remaining[final_mask]
        candidates.append(SimilarityCandidate(
            transform=refit,
            inlier_indices=group,
            rotation_angle_abs=abs(refit.theta),
        ))
        remaining = remaining[~final_mask]
        round_id += 1
        if remaining.size < min_keep:
            break
    if not candidates:
        raise NoConsensusError("no similarity-consistent group with >= 2 inliers")
    return min(candidates, key=lambda c: c.rotation_angle_abs)


def rotation_angle(H: np.ndarray) -> float:
    """Angle of the perspective row: atan2(h8, h7); 0 when the row vanishes."""
    H = normalize_homography(H)
    h7, h8 = H[2, 0], H[2, 1]
    if math.hypot(h7, h8) < 1e-12:
        return 0.0
    return math.atan2(h8, h7)


def decompose_projective(H: np.ndarray):
    """Split H R into affine and pure-projective parts.

    Returns (Q, Q_a, Q_p, R) with Q = H @ R, R the rotation aligning the
    perspective row so Q's bottom row is (-c, 0, 1), c = hypot(h7, h8),
    Q_p carrying only that row and Q_a affine; Q_a @ Q_p == Q exactly.
    """
    H = normalize_homography(H)
    h7, h8 = H[2, 0], H[2, 1]
    c = math.hypot(h7, h8)
    phi = math.atan2(-h8, -h7) if c >= 1e-12 else 0.0
    R = np.array([
        [math.cos(phi), -math.sin(phi), 0.0],
        [math.sin(phi), math.cos(phi), 0.0],
        [0.0, 0.0, 1.0],
    ])
    Q = H @ R
    q = Q
    Q_a = np.array([
        [q[0, 0] + c * q[0, 2], q[0, 1], q[0, 2]],
        [q[1, 0] + c * q[1, 2], q[1, 1], q[1, 2]],
        [0.0, 0.0, 1.0],
    ])
    Q_p = np.array([
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [-c, 0.0, 1.0],
    ])
    return Q, Q_a, Q_p, R


def local_scale_change(H: np.ndarray, u: float) -> float:
    """det of the warp Jacobian along the u-axis: lambda_a / (1 - c u)^3."""
    H = normalize_homography(H)
    _, Q_a, _, _ = decompose_projective(H)
    lam = Q_a[0, 0] * Q_a[1, 1] - Q_a[0, 1] * Q_a[1, 0]
    c = math.hypot(H[2, 0], H[2, 1])
    denom = 1.0 - c * u
    if denom <= 1e-9:
        raise HorizonError(f"u = {u} lies on or beyond the projective horizon (c = {c})")
    return lam / denom**3


def jacobian_scale(H: np.ndarray, p) -> float:
    """det of the Jacobian of the projective map at point p.

    Equals det(H) / w^3 with w the homogeneous divisor; invariant to the
    scale of H, and equal to local_scale_change evaluated in the rotated
    frame.
    """
    H = np.asarray(H, dtype=np.float64)
    x, y = float(p[0]), float(p[1])
    w = H[2, 0] * x + H[2, 1] * y + H[2, 2]
    if abs(w) < 1e-12:
        raise HorizonError(f"point {p} lies on the projective horizon")
    return float(np.linalg.det(H)) / w**3


@dataclass
class BlendWeights:
    """Per-cell convex weights: tau for the homography, xi for the similarity."""

    tau: np.ndarray  # (rows, cols)
    xi: np.ndarray   # (rows, cols)

    def validate(self) -> "BlendWeights":
        if np.abs(self.tau + self.xi - 1.0).max() > 1e-12:
            raise ValidationError("blend weights must satisfy tau + xi = 1")
        return self


def compute_blend_weights(mesh: GridMesh, H_ref_frame: np.ndarray,
                          ref_center, overlap_centroid) -> BlendWeights:
    """Ramp xi from 0 to 1 along the u-axis projection of cell centers.

    The axis direction comes from the perspective row of the supplied
    (global) homography; its sign is chosen so the overlap centroid
    projects onto the low end, giving the homography full weight near
    the overlap and the similarity full weight at the far edge.
    """
    theta = rotation_angle(H_ref_frame)
    axis = np.array([math.cos(theta), math.sin(theta)])
    origin = np.asarray(ref_center, dtype=np.float64)
    centers = mesh.cell_centers()
    d = (centers - origin) @ axis
    d_ov = float((np.asarray(overlap_centroid, dtype=np.float64) - origin) @ axis)
    if d_ov > 0.5 * (d.min() + d.max()):
        d = -d
    span = d.max() - d.min()
    if span < 1e-9:
        xi = np.zeros_like(d)
    else:
        xi = (d - d.min()) / span
    return BlendWeights(tau=1.0 - xi, xi=xi)


@dataclass
class AdjustedWarpPair:
    """Blended per-cell warps: H' for the target, T' = H' H^-1 for the reference."""

    target_warps: np.ndarray     # (rows, cols, 3, 3)
    reference_warps: np.ndarray  # (rows, cols, 3, 3)

    def flat_target(self) -> np.ndarray:
        return self.target_warps.reshape(-1, 3, 3)

    def flat_reference(self) -> np.ndarray:
        return self.reference_warps.reshape(-1, 3, 3)


def apply_similarity_constraint(field: LocalWarpField, S, weights: BlendWeights) -> AdjustedWarpPair:
    """Blend each cell: H'_i = tau_i H_i + xi_i S, and T'_i = H'_i H_i^-1.

    All H_i must be scale-normalized (bottom-right 1) and S embedded as a
    homography with bottom row (0, 0, 1), so the element-wise blend is
    meaningful and keeps the corner at exactly 1.
    """
    S_mat = S.as_matrix() if isinstance(S, SimilarityTransform) else np.asarray(S, dtype=np.float64)
    if np.abs(S_mat[2] - [0, 0, 1]).max() > 1e-12:
        raise ValidationError("similarity must have bottom row (0, 0, 1)")
    H = field.flat()
    corner = H[:, 2, 2]
    if np.any(np.abs(corner - 1.0) > 1e-9):
        H = H / corner[:, None, None]
    dets = np.linalg.det(H)
    if np.any(np.abs(dets) <= 1e-12):
        idx = int(np.nonzero(np.abs(dets) <= 1e-12)[0][0])
        raise NumericalError(f"singular cell homography at {divmod(idx, field.mesh.cols)}")
    tau = weights.tau.reshape(-1, 1, 1)
    xi = weights.xi.reshape(-1, 1, 1)
    H_prime = tau * H + xi * S_mat[None, :, :]
    T_prime = H_prime @ np.linalg.inv(H)
    rows, cols = field.mesh.rows, field.mesh.cols
    return AdjustedWarpPair(
        target_warps=H_prime.reshape(rows, cols, 3, 3),
        reference_warps=T_prime.reshape(rows, cols, 3, 3),
    )
