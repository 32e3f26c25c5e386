"""Per-cell local homographies via distance-weighted DLT.

Every mesh cell re-solves the same stacked constraint system with a
diagonal weight that favors correspondences near the cell center:
Gaussian in the point distance, Gaussian in the point-to-segment
distance for lines, floored at eta to keep far cells well-posed. With
the floor at 1 the weights saturate and every cell reproduces the
global estimate exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .dlt import KIND_POINT, StackedSystem, build_stacked_system
from .errors import DegenerateSeparationError, RankDeficiencyError, ValidationError
from .geometry import point_segment_distance as _point_segment_distance
from .mesh import GridMesh

DEFAULT_SIGMA = 8.5
DEFAULT_ETA = 0.01


def point_weight(center, keypoint, sigma: float = DEFAULT_SIGMA, eta: float = DEFAULT_ETA) -> float:
    """max(exp(-||center - keypoint||^2 / sigma^2), eta)."""
    if sigma <= 0:
        raise ValidationError(f"sigma must be positive, got {sigma}")
    d2 = float(np.sum((np.asarray(center, dtype=float) - np.asarray(keypoint, dtype=float)) ** 2))
    return max(float(np.exp(-d2 / (sigma * sigma))), eta)


def line_weight(center, segment, sigma: float = DEFAULT_SIGMA, eta: float = DEFAULT_ETA) -> float:
    """max(exp(-d_l(center, segment)^2 / sigma^2), eta) with d_l the segment distance."""
    if sigma <= 0:
        raise ValidationError(f"sigma must be positive, got {sigma}")
    d = _point_segment_distance(center, segment)
    return max(float(np.exp(-d * d / (sigma * sigma))), eta)


@dataclass
class LocalWarpField:
    """One scale-normalized homography per mesh cell."""

    mesh: GridMesh
    homographies: np.ndarray  # (rows, cols, 3, 3)
    sigma: float
    eta: float

    def cell(self, row: int, col: int) -> np.ndarray:
        return self.homographies[row, col]

    def flat(self) -> np.ndarray:
        return self.homographies.reshape(-1, 3, 3)


def constant_field(mesh: GridMesh, H: np.ndarray, sigma: float = DEFAULT_SIGMA,
                   eta: float = DEFAULT_ETA) -> LocalWarpField:
    """Field for the global-homography pipeline: every cell identical."""
    tiled = np.broadcast_to(np.asarray(H, dtype=np.float64), (mesh.rows, mesh.cols, 3, 3)).copy()
    return LocalWarpField(mesh=mesh, homographies=tiled, sigma=sigma, eta=eta)


def weight_rows(system: StackedSystem, centers: np.ndarray, sigma: float, eta: float) -> np.ndarray:
    """(n_centers, n_rows) weights, duplicated over each row pair.

    Distances are measured in ORIGINAL target-image pixels even though
    the rows they scale are built from normalized coordinates.
    """
    if sigma <= 0:
        raise ValidationError(f"sigma must be positive, got {sigma}")
    if not (0.0 <= eta <= 1.0):
        raise ValidationError(f"eta must lie in [0, 1], got {eta}")
    n = centers.shape[0]
    inv_s2 = 1.0 / (sigma * sigma)
    out = np.empty((n, system.C.shape[0]))
    pt_cols = system.row_kind == KIND_POINT
    if system.n_points:
        d2 = ((centers[:, None, :] - system.target_points[None, :, :]) ** 2).sum(-1)
        wp = np.maximum(np.exp(-d2 * inv_s2), eta)
        out[:, pt_cols] = wp[:, system.row_source[pt_cols]]
    if system.n_lines:
        d = kernels.point_segment_distance_matrix(centers, system.target_segments)
        wl = np.maximum(np.exp(-d * d * inv_s2), eta)
        out[:, ~pt_cols] = wl[:, system.row_source[~pt_cols]]
    return out


def estimate_local_warp(points, lines, mesh: GridMesh, sigma: float = DEFAULT_SIGMA,
                        eta: float = DEFAULT_ETA, line_weight_scale: float = 1.0) -> LocalWarpField:
    """Moving-DLT field: one weighted solve per mesh cell.

    The stacked normalized system is built once; only the diagonal
    weights change across cells. Rank or separation failures are
    annotated with the offending cell.
    """
    system = build_stacked_system(points, lines, line_weight=line_weight_scale)
    centers = mesh.cell_centers().reshape(-1, 2)
    weights = weight_rows(system, centers, sigma, eta)
    h, sv = kernels.weighted_nullvec_batch(system.C, weights)

    no_support = sv[:, 0] <= 0
    if np.any(no_support):
        idx = int(np.nonzero(no_support)[0][0])
        raise RankDeficiencyError(
            f"all weights vanished at cell {divmod(idx, mesh.cols)} (eta = 0 and no nearby data)"
        )
    bad_rank = sv[:, 1] / sv[:, 0] < 1e-12
    if np.any(bad_rank):
        idx = int(np.nonzero(bad_rank)[0][0])
        raise RankDeficiencyError(
            f"weighted system rank-deficient at cell {divmod(idx, mesh.cols)}"
        )
    bad_sep = (sv[:, 1] - sv[:, 2]) / sv[:, 0] <= 1e-10
    if np.any(bad_sep):
        idx = int(np.nonzero(bad_sep)[0][0])
        raise DegenerateSeparationError(
            f"weighted system degenerate at cell {divmod(idx, mesh.cols)}"
        )

    T_ref_inv = np.linalg.inv(system.T_reference)
    Hs = np.einsum("ij,njk,kl->nil", T_ref_inv, h.reshape(-1, 3, 3), system.T_target)
    corner = Hs[:, 2, 2]
    small = np.abs(corner) <= 1e-12
    if np.any(small):
        idx = int(np.nonzero(small)[0][0])
        raise RankDeficiencyError(f"homography scale vanished at cell {divmod(idx, mesh.cols)}")
    Hs = Hs / corner[:, None, None]
    dets = np.linalg.det(Hs)
    singular = np.abs(dets) <= 1e-12
    if np.any(singular):
        idx = int(np.nonzero(singular)[0][0])
        raise RankDeficiencyError(f"singular local homography at cell {divmod(idx, mesh.cols)}")
    return LocalWarpField(
        mesh=mesh,
        homographies=Hs.reshape(mesh.rows, mesh.cols, 3, 3),
        sigma=sigma,
        eta=eta,
    )
