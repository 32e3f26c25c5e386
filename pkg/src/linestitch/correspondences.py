"""Correspondence data model, JSON file format, and RANSAC filtering.

The file format is the contract with the feature-extraction frontend:

    {
      "target_size": [w, h],
      "reference_size": [w, h],
      "points": [[x, y, x', y'], ...],
      "lines":  [[x0, y0, x1, y1, x0', y0', x1', y1'], ...]
    }

All coordinates are pixels, top-left origin, y down. Coordinates are
serialized as decimals with exactly 6 fractional digits so that files
round-trip byte-identically through load/save.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .dlt import estimate_homography_4pt
from .errors import (
    InsufficientMatchesError,
    NoConsensusError,
    ParseError,
    ValidationError,
)
from .geometry import line_coeffs_from_endpoints
from .rng import sample_without_replacement


@dataclass
class CorrespondenceSet:
    """Point and line matches between a target/reference image pair.

    ``points`` is (M, 4) as [x, y, x', y']; ``lines`` is (K, 8) as
    [x0, y0, x1, y1, x0', y0', x1', y1']. Line correspondence is between
    infinite-line supports: endpoints need not correspond.
    """

    points: np.ndarray = field(default_factory=lambda: np.empty((0, 4)))
    lines: np.ndarray = field(default_factory=lambda: np.empty((0, 8)))
    target_size: tuple[int, int] = (0, 0)
    reference_size: tuple[int, int] = (0, 0)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 4)
        self.lines = np.asarray(self.lines, dtype=np.float64).reshape(-1, 8)
        self.target_size = (int(self.target_size[0]), int(self.target_size[1]))
        self.reference_size = (int(self.reference_size[0]), int(self.reference_size[1]))

    @property
    def m(self) -> int:
        return self.points.shape[0]

    @property
    def k(self) -> int:
        return self.lines.shape[0]

    def validate(self) -> "CorrespondenceSet":
        """Check finiteness, sanity bounds and segment non-degeneracy."""
        if min(self.target_size) <= 0 or min(self.reference_size) <= 0:
            raise ValidationError(f"non-positive image size {self.target_size} / {self.reference_size}")
        bad = []
        max_dim = float(max(*self.target_size, *self.reference_size))
        bound = 4.0 * max_dim
        for name, arr in (("points", self.points), ("lines", self.lines)):
            if arr.size and not np.all(np.isfinite(arr)):
                bad += [f"{name}[{i}] not finite" for i in np.nonzero(~np.isfinite(arr).all(axis=1))[0]]
            if arr.size and np.any(np.abs(arr) > bound):
                bad += [
                    f"{name}[{i}] outside sanity bounds +-{bound:g}"
                    for i in np.nonzero((np.abs(arr) > bound).any(axis=1))[0]
                ]
        for i, row in enumerate(self.lines):
            if np.hypot(row[2] - row[0], row[3] - row[1]) < 1e-9:
                bad.append(f"lines[{i}] target segment degenerate")
            if np.hypot(row[6] - row[4], row[7] - row[5]) < 1e-9:
                bad.append(f"lines[{i}] reference segment degenerate")
        if bad:
            raise ValidationError("invalid correspondence records: " + "; ".join(bad))
        return self

    def target_segment_coeffs(self) -> np.ndarray:
        """(K, 3) normalized implicit coefficients of the target lines."""
        return np.array([line_coeffs_from_endpoints(r[0:2], r[2:4]) for r in self.lines]).reshape(-1, 3)

    def reference_segment_coeffs(self) -> np.ndarray:
        """(K, 3) normalized implicit coefficients of the reference lines."""
        return np.array([line_coeffs_from_endpoints(r[4:6], r[6:8]) for r in self.lines]).reshape(-1, 3)

    def with_points(self, points: np.ndarray) -> "CorrespondenceSet":
        return CorrespondenceSet(points, self.lines.copy(), self.target_size, self.reference_size)


def _parse_size(obj, key) -> tuple[int, int]:
    try:
        w, h = obj[key]
    except (KeyError, TypeError, ValueError):
        raise ParseError(f"missing or malformed '{key}' (expected [w, h])")
    if not all(isinstance(v, (int, float)) and float(v).is_integer() and v > 0 for v in (w, h)):
        raise ParseError(f"'{key}' must hold two positive integers, got {obj[key]!r}")
    return int(w), int(h)


def _parse_rows(obj, key, width) -> np.ndarray:
    raw = obj.get(key, [])
    if not isinstance(raw, list):
        raise ParseError(f"'{key}' must be an array")
    rows = np.empty((len(raw), width))
    for i, row in enumerate(raw):
        if not isinstance(row, list) or len(row) != width:
            raise ParseError(f"{key}[{i}] has {len(row) if isinstance(row, list) else 'non-array'} elements, expected {width}")
        try:
            rows[i] = [float(v) for v in row]
        except (TypeError, ValueError):
            raise ParseError(f"{key}[{i}] holds a non-numeric value")
    return rows


def load_correspondences(path: str | os.PathLike) -> CorrespondenceSet:
    """Parse and validate a correspondence JSON file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ParseError(f"{path}: top level must be an object")
    cs = CorrespondenceSet(
        points=_parse_rows(obj, "points", 4),
        lines=_parse_rows(obj, "lines", 8),
        target_size=_parse_size(obj, "target_size"),
        reference_size=_parse_size(obj, "reference_size"),
    )
    return cs.validate()


def _fmt_row(row) -> str:
    return "[" + ", ".join(format(float(v), ".6f") for v in row) + "]"


def save_correspondences(cs: CorrespondenceSet, path: str | os.PathLike) -> None:
    """Write the canonical 6-fractional-digit JSON representation."""
    lines = [
        "{",
        f'  "target_size": [{cs.target_size[0]}, {cs.target_size[1]}],',
        f'  "reference_size": [{cs.reference_size[0]}, {cs.reference_size[1]}],',
        '  "points": [' + ", ".join(_fmt_row(r) for r in cs.points) + "],",
        '  "lines": [' + ", ".join(_fmt_row(r) for r in cs.lines) + "]",
        "}",
    ]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


@dataclass
class RansacResult:
    inliers: np.ndarray        # (Mi, 4) rows of the input
    outliers: np.ndarray       # (Mo, 4) rows of the input
    model: np.ndarray          # 3x3 homography from the winning minimal sample
    inlier_mask: np.ndarray    # (M,) bool over the input order


def symmetric_transfer_error(H: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Per-match sqrt(||Hp - p'||^2 + ||H^{-1}p' - p||^2) in pixels."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 4)
    Hinv = np.linalg.inv(H)

    def _proj(M, xy):
        w = M[2, 0] * xy[:, 0] + M[2, 1] * xy[:, 1] + M[2, 2]
        w = np.where(np.abs(w) < 1e-12, np.inf, w)
        return np.column_stack([
            (M[0, 0] * xy[:, 0] + M[0, 1] * xy[:, 1] + M[0, 2]) / w,
            (M[1, 0] * xy[:, 0] + M[1, 1] * xy[:, 1] + M[1, 2]) / w,
        ])

    fwd = _proj(H, pts[:, 0:2]) - pts[:, 2:4]
    bwd = _proj(Hinv, pts[:, 2:4]) - pts[:, 0:2]
    return np.sqrt((fwd**2).sum(axis=1) + (bwd**2).sum(axis=1))


def ransac_filter_points(
    points: np.ndarray,
    threshold: float = 3.0,
    max_iters: int = 2000,
    seed: int = 0,
) -> RansacResult:
    """Split point matches into inliers/outliers of a 4-point homography.

    Minimal 4-point samples are drawn with the counter-based generator
    over a canonical (lexicographically sorted) ordering of the matches,
    so the inlier SET is invariant to input permutation for a fixed
    seed. The returned model is the winning minimal-sample homography;
    inliers are the matches with symmetric transfer error below the
    threshold under it.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 4)
    n = pts.shape[0]
    if n < 4:
        raise InsufficientMatchesError(f"RANSAC needs >= 4 point matches, got {n}")
    if threshold <= 0:
        raise ValidationError(f"RANSAC threshold must be positive, got {threshold}")

    canonical = np.lexsort((pts[:, 3], pts[:, 2], pts[:, 1], pts[:, 0]))
    best_count = -1
    best_err_sum = math.inf
    best_model = None
    best_mask = None
    for it in range(max_iters):
        pick = canonical[sample_without_replacement(seed, 4 * it, n, 4)]
        H = estimate_homography_4pt(pts[pick])
        if H is None:
            continue
        err = symmetric_transfer_error(H, pts)
        mask = err < threshold
        count = int(mask.sum())
        err_sum = float(np.minimum(err, threshold).sum())
        if count > best_count or (count == best_count and err_sum < best_err_sum):
            best_count, best_err_sum, best_model, best_mask = count, err_sum, H, mask
            if best_count == n:
                break
    if best_model is None or best_count < 4:
        raise NoConsensusError(f"no homography with >= 4 inliers found (best: {best_count})")
    return RansacResult(
        inliers=pts[best_mask],
        outliers=pts[~best_mask],
        model=best_model,
        inlier_mask=best_mask,
    )


def filter_lines_by_model(
    lines: np.ndarray, model: np.ndarray, threshold: float = 5.0
) -> tuple[np.ndarray, np.ndarray]:
    """Optional geometric filter on line matches (off by default upstream).

    A line match is kept when both target endpoints, mapped through the
    point-RANSAC model, land within ``threshold`` pixels of the
    reference support line.
    """
    segs = np.asarray(lines, dtype=np.float64).reshape(-1, 8)
    if segs.shape[0] == 0:
        return segs, segs.copy()
    keep = np.ones(segs.shape[0], dtype=bool)
    for i, row in enumerate(segs):
        coeffs = line_coeffs_from_endpoints(row[4:6], row[6:8])
        for p in (row[0:2], row[2:4]):
            w = model[2, 0] * p[0] + model[2, 1] * p[1] + model[2, 2]
            if abs(w) < 1e-12:
                keep[i] = False
                break
            q = (model[:2, :2] @ p + model[:2, 2]) / w
            if abs(coeffs[0] * q[0] + coeffs[1] * q[1] + coeffs[2]) > threshold:
                keep[i] = False
                break
    return segs[keep], segs[~keep]
