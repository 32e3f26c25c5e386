"""Homogeneous-coordinate primitives shared by all estimators.

Conventions used across the whole package:

- Image frame has its origin at the top-left pixel, x growing rightward
  and y downward. A point is a length-2 float array ``[x, y]``.
- A line is stored by its implicit coefficients ``(a, b, c)`` with
  ``a*x + b*y + c = 0`` and ``a**2 + b**2 == 1``, so that evaluating the
  implicit equation at a point directly yields the signed perpendicular
  distance.
- Homographies are 3x3 float arrays acting on column vectors
  ``[x, y, 1]^T``; they are scale-normalized so the bottom-right entry
  is 1 whenever it is not vanishingly small.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError, PointAtInfinityError, ValidationError

Array = np.ndarray


def as_point(p) -> Array:
    """Coerce array-like to a float64 point of shape (2,)."""
    a = np.asarray(p, dtype=np.float64).reshape(2)
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"non-finite point {a}")
    return a


@dataclass(frozen=True)
class LineSegment:
    """Finite segment plus the implicit coefficients of its support line.

    ``coeffs`` is the normalized cross product of the homogeneous
    endpoints; both endpoints satisfy the implicit equation to within
    1e-9 after normalization.
    """

    p0: Array
    p1: Array
    coeffs: Array = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        object.__setattr__(self, "p0", as_point(self.p0))
        object.__setattr__(self, "p1", as_point(self.p1))
        if self.coeffs is None:
            object.__setattr__(self, "coeffs", _implicit_coeffs(self.p0, self.p1))

    @property
    def midpoint(self) -> Array:
        return 0.5 * (self.p0 + self.p1)

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.p1 - self.p0))


def _implicit_coeffs(p0: Array, p1: Array) -> Array:
    l = np.cross(np.append(p0, 1.0), np.append(p1, 1.0))
    norm = np.hypot(l[0], l[1])
    if norm < 1e-12:
        raise ValidationError(f"degenerate segment {p0} -> {p1}")
    return l / norm


def line_from_endpoints(p0, p1) -> LineSegment:
    """Build a LineSegment from two endpoints.

    Raises ValidationError when the endpoints are closer than 1e-9.
    """
    p0 = as_point(p0)
    p1 = as_point(p1)
    if np.linalg.norm(p1 - p0) < 1e-9:
        raise ValidationError(f"degenerate segment: endpoints coincide at {p0}")
    return LineSegment(p0, p1)


def line_coeffs_from_endpoints(p0, p1) -> Array:
    """Normalized implicit coefficients of the line through two points."""
    return _implicit_coeffs(as_point(p0), as_point(p1))


def point_line_distance(p, line) -> float:
    """Perpendicular distance from a point to an infinite line.

    ``line`` may be a LineSegment or raw (a, b, c) coefficients.
    """
    a, b, c = line.coeffs if isinstance(line, LineSegment) else np.asarray(line, dtype=np.float64)
    x, y = as_point(p)
    return abs(a * x + b * y + c) / np.hypot(a, b)


def point_segment_distance(p, seg: LineSegment) -> float:
    """Distance from a point to the nearest point of a finite segment.

    Inside the segment's perpendicular slab this is the perpendicular
    distance to the support line; beyond either end it is the distance
    to the nearer endpoint.
    """
    p = as_point(p)
    d = seg.p1 - seg.p0
    denom = float(d @ d)
    t = float((p - seg.p0) @ d) / denom if denom > 0 else 0.0
    t = min(1.0, max(0.0, t))
    return float(np.linalg.norm(p - (seg.p0 + t * d)))


@dataclass(frozen=True)
class SimilarityTransform:
    """4-DoF transform: uniform scale, rotation, translation."""

    scale: float
    theta: float
    tx: float
    ty: float

    def __post_init__(self):
        if self.scale <= 0:
            raise ValidationError(f"similarity scale must be positive, got {self.scale}")

    def as_matrix(self) -> Array:
        c = self.scale * np.cos(self.theta)
        s = self.scale * np.sin(self.theta)
        return np.array([[c, -s, self.tx], [s, c, self.ty], [0.0, 0.0, 1.0]])

    def apply(self, pts: Array) -> Array:
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        c = self.scale * np.cos(self.theta)
        s = self.scale * np.sin(self.theta)
        out = np.empty_like(pts)
        out[:, 0] = c * pts[:, 0] - s * pts[:, 1] + self.tx
        out[:, 1] = s * pts[:, 0] + c * pts[:, 1] + self.ty
        return out


def normalize_homography(H: Array) -> Array:
    """Scale so H[2,2] == 1, or to unit Frobenius norm when that entry vanishes."""
    H = np.asarray(H, dtype=np.float64).reshape(3, 3)
    if abs(H[2, 2]) > 1e-12:
        return H / H[2, 2]
    return H / np.linalg.norm(H)


def check_invertible(H: Array, context: str = "homography") -> Array:
    H = np.asarray(H, dtype=np.float64)
    if abs(np.linalg.det(H)) <= 1e-12:
        raise NumericalError(f"singular {context}: |det| <= 1e-12")
    return H


def apply_homography(H: Array, p) -> Array:
    """Map a single point through a homography and dehomogenize."""
    x, y = as_point(p)
    w = H[2, 0] * x + H[2, 1] * y + H[2, 2]
    if abs(w) <= 1e-12:
        raise PointAtInfinityError(f"point {p} maps to infinity")
    return np.array([
        (H[0, 0] * x + H[0, 1] * y + H[0, 2]) / w,
        (H[1, 0] * x + H[1, 1] * y + H[1, 2]) / w,
    ])


def apply_homography_batch(H: Array, pts: Array) -> Array:
    """Map an (N, 2) array of points through a homography.

    Raises when any w-component magnitude falls below 1e-12.
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
    w = H[2, 0] * pts[:, 0] + H[2, 1] * pts[:, 1] + H[2, 2]
    if np.any(np.abs(w) <= 1e-12):
        raise PointAtInfinityError("some points map to infinity")
    out = np.empty_like(pts)
    out[:, 0] = (H[0, 0] * pts[:, 0] + H[0, 1] * pts[:, 1] + H[0, 2]) / w
    out[:, 1] = (H[1, 0] * pts[:, 0] + H[1, 1] * pts[:, 1] + H[1, 2]) / w
    return out


def transform_line_coeffs(H: Array, coeffs: Array) -> Array:
    """Implicit coefficients of a line after its points map through H.

    If points map as p' = Hp, lines map as l' = H^{-T} l. The result is
    renormalized to a'**2 + b'**2 = 1.
    """
    l = np.linalg.inv(H).T @ np.asarray(coeffs, dtype=np.float64)
    norm = np.hypot(l[0], l[1])
    if norm < 1e-12:
        raise NumericalError("line maps to the line at infinity")
    return l / norm


def normalize_points(points: Array):
    """Center an (N, 2) point set and scale mean norm to sqrt(2).

    Returns (T, normalized_points) where T is the 3x3 similarity doing
    the job. Raises ValidationError when the points (nearly) coincide.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if pts.shape[0] < 2:
        raise ValidationError("need at least 2 points to normalize")
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    mean_dist = np.sqrt((centered**2).sum(axis=1)).mean()
    if mean_dist < 1e-12:
        raise ValidationError("degenerate configuration: all points coincide")
    s = np.sqrt(2.0) / mean_dist
    T = np.array([
        [s, 0.0, -s * centroid[0]],
        [0.0, s, -s * centroid[1]],
        [0.0, 0.0, 1.0],
    ])
    return T, centered * s


def normalize_correspondences(points: Array, line_endpoints: Array):
    """Joint normalization of feature points and line endpoints.

    Both inputs are (N, 2) arrays (either may be empty); the similarity
    is computed on their union and applied to each. Line coefficients
    must be recomputed by the caller from the normalized endpoints.
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    line_endpoints = np.asarray(line_endpoints, dtype=np.float64).reshape(-1, 2)
    union = np.vstack([points, line_endpoints])
    T, _ = normalize_points(union)
    s = T[0, 0]
    shift = T[:2, 2]
    return T, points * s + shift, line_endpoints * s + shift
