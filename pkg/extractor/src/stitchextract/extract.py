"""SIFT keypoint and LSD line-segment matching between an image pair.

Emits the stitching correspondence JSON contract:

    {"target_size": [w, h], "reference_size": [w, h],
     "points": [[x, y, x', y'], ...],
     "lines":  [[x0, y0, x1, y1, x0', y0', x1', y1'], ...]}

Point matches are Lowe-ratio filtered SIFT matches. Line matches come
from a homography-guided consistency test: a point-RANSAC homography is
fit to the point matches, and LSD segments pair up when each one's
endpoints land within a few pixels of the other's support line after
mapping through that homography (both directions).

Determinism: SIFT, the brute-force matcher and LSD are deterministic
for a fixed OpenCV build; the only stochastic step is OpenCV's RANSAC,
which is pinned via cv2.setRNGSeed from the config seed.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass

import cv2
import numpy as np

log = logging.getLogger(__name__)


@dataclass
class ExtractionConfig:
    ratio: float = 0.75              # Lowe ratio-test threshold
    n_features: int = 0              # SIFT cap, 0 = unlimited
    contrast_threshold: float = 0.04
    edge_threshold: float = 10.0
    line_strategy: str = "guided"    # "guided" or "none"
    line_tolerance: float = 5.0      # px, endpoint-to-line consistency
    min_line_length: float = 25.0    # px, LSD segments below are dropped
    min_line_overlap: float = 0.3    # fraction of shared support required
    ransac_threshold: float = 3.0
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.ratio < 1.0):
            raise ValueError(f"ratio must lie in (0, 1), got {self.ratio}")


def _to_gray(image: np.ndarray) -> np.ndarray:
    if image.ndim == 2:
        return image
    return cv2.cvtColor(image, cv2.COLOR_RGB2GRAY)


def match_points(image_a: np.ndarray, image_b: np.ndarray,
                 config: ExtractionConfig) -> np.ndarray:
    """Ratio-test filtered SIFT matches as an (M, 4) array [x, y, x', y']."""
    sift = cv2.SIFT_create(
        nfeatures=config.n_features,
        contrastThreshold=config.contrast_threshold,
        edgeThreshold=config.edge_threshold,
    )
    kp_a, desc_a = sift.detectAndCompute(_to_gray(image_a), None)
    kp_b, desc_b = sift.detectAndCompute(_to_gray(image_b), None)
    if desc_a is None or desc_b is None or len(kp_a) < 2 or len(kp_b) < 2:
        log.warning("too few SIFT features (%d / %d)", len(kp_a or []), len(kp_b or []))
        return np.empty((0, 4))
    matcher = cv2.BFMatcher(cv2.NORM_L2)
    raw = matcher.knnMatch(desc_a, desc_b, k=2)
    rows = []
    for pair in raw:
        if len(pair) < 2:
            continue
        best, second = pair
        if best.distance < config.ratio * second.distance:
            pa = kp_a[best.queryIdx].pt
            pb = kp_b[best.trainIdx].pt
            rows.append([pa[0], pa[1], pb[0], pb[1]])
    if not rows:
        log.warning("no point matches survived the ratio test")
        return np.empty((0, 4))
    return np.asarray(rows, dtype=np.float64)


def detect_segments(image: np.ndarray, min_length: float) -> np.ndarray:
    """LSD segments of at least min_length pixels, as (N, 4) endpoint rows."""
    lsd = cv2.createLineSegmentDetector()
    lines = lsd.detect(_to_gray(image))[0]
    if lines is None:
        return np.empty((0, 4))
    segs = lines.reshape(-1, 4).astype(np.float64)
    lengths = np.hypot(segs[:, 2] - segs[:, 0], segs[:, 3] - segs[:, 1])
    return segs[lengths >= min_length]


def _support_coeffs(seg: np.ndarray) -> np.ndarray:
    """Normalized implicit line (a, b, c) through the segment's endpoints."""
    x0, y0, x1, y1 = seg
    a = y0 - y1
    b = x1 - x0
    c = x0 * y1 - x1 * y0
    norm = np.hypot(a, b)
    return np.array([a / norm, b / norm, c / norm])


def _apply_h(H: np.ndarray, pts: np.ndarray) -> np.ndarray:
    hom = np.column_stack([pts, np.ones(len(pts))]) @ H.T
    return hom[:, :2] / hom[:, 2:3]


def _line_distance(pts: np.ndarray, coeffs: np.ndarray) -> float:
    return float(np.abs(pts @ coeffs[:2] + coeffs[2]).max())


def _projected_overlap(seg_ref: np.ndarray, mapped: np.ndarray) -> float:
    """Shared fraction of the two segments along the reference direction."""
    p0 = seg_ref[0:2]
    d = seg_ref[2:4] - p0
    length = np.hypot(*d)
    if length < 1e-9:
        return 0.0
    d = d / length
    t_ref = np.array([0.0, length])
    t_map = np.sort((mapped - p0) @ d)
    lo = max(t_ref[0], t_map[0])
    hi = min(t_ref[1], t_map[1])
    denom = min(length, t_map[1] - t_map[0])
    if denom < 1e-9:
        return 0.0
    return max(0.0, hi - lo) / denom


def match_lines_guided(segs_a: np.ndarray, segs_b: np.ndarray, H: np.ndarray,
                       config: ExtractionConfig) -> np.ndarray:
    """Greedy one-to-one pairing of mutually homography-consistent segments."""
    if segs_a.shape[0] == 0 or segs_b.shape[0] == 0:
        return np.empty((0, 8))
    H_inv = np.linalg.inv(H)
    coeffs_b = [_support_coeffs(s) for s in segs_b]
    coeffs_a = [_support_coeffs(s) for s in segs_a]
    candidates = []
    for i, sa in enumerate(segs_a):
        ends_a = sa.reshape(2, 2)
        mapped_a = _apply_h(H, ends_a)
        for j, sb in enumerate(segs_b):
            d_fwd = _line_distance(mapped_a, coeffs_b[j])
            if d_fwd > config.line_tolerance:
                continue
            ends_b = sb.reshape(2, 2)
            mapped_b = _apply_h(H_inv, ends_b)
            d_bwd = _line_distance(mapped_b, coeffs_a[i])
            if d_bwd > config.line_tolerance:
                continue
            if _projected_overlap(sb, mapped_a) < config.min_line_overlap:
                continue
            candidates.append((d_fwd + d_bwd, i, j))
    candidates.sort()
    used_a: set[int] = set()
    used_b: set[int] = set()
    rows = []
    for _, i, j in candidates:
        if i in used_a or j in used_b:
            continue
        used_a.add(i)
        used_b.add(j)
        rows.append(np.concatenate([segs_a[i], segs_b[j]]))
    return np.asarray(rows, dtype=np.float64).reshape(-1, 8)


def _fmt_row(row) -> str:
    return "[" + ", ".join(format(float(v), ".6f") for v in row) + "]"


def write_correspondences(points: np.ndarray, lines: np.ndarray,
                          target_size, reference_size,
                          path: str | os.PathLike) -> None:
    """Write the canonical correspondence JSON (6 fractional digits)."""
    text = "\n".join([
        "{",
        f'  "target_size": [{int(target_size[0])}, {int(target_size[1])}],',
        f'  "reference_size": [{int(reference_size[0])}, {int(reference_size[1])}],',
        '  "points": [' + ", ".join(_fmt_row(r) for r in points) + "],",
        '  "lines": [' + ", ".join(_fmt_row(r) for r in lines) + "]",
        "}",
    ])
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text + "\n")


def extract_and_match(image_a: np.ndarray, image_b: np.ndarray,
                      out_path: str | os.PathLike,
                      config: ExtractionConfig | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Detect, match, and write the correspondence file for one pair.

    ``image_a`` is the target side, ``image_b`` the reference side.
    Returns the (points, lines) arrays that were written. A file is
    always emitted, even when matching comes up empty.
    """
    config = config or ExtractionConfig()
    cv2.setRNGSeed(config.seed)
    points = match_points(image_a, image_b, config)

    lines = np.empty((0, 8))
    if config.line_strategy == "guided":
        if points.shape[0] >= 4:
            H, _ = cv2.findHomography(points[:, 0:2], points[:, 2:4],
                                      method=cv2.RANSAC,
                                      ransacReprojThreshold=config.ransac_threshold)
            if H is not None and abs(np.linalg.det(H)) > 1e-12:
                segs_a = detect_segments(image_a, config.min_line_length)
                segs_b = detect_segments(image_b, config.min_line_length)
                lines = match_lines_guided(segs_a, segs_b, H, config)
            else:
                log.warning("point homography failed; emitting no line matches")
        else:
            log.warning("too few point matches (%d) to guide line matching",
                        points.shape[0])
    elif config.line_strategy != "none":
        raise ValueError(f"unknown line strategy {config.line_strategy!r}")

    h_a, w_a = image_a.shape[:2]
    h_b, w_b = image_b.shape[:2]
    write_correspondences(points, lines, (w_a, h_a), (w_b, h_b), out_path)
    log.info("wrote %d point and %d line matches to %s",
             points.shape[0], lines.shape[0], out_path)
    return points, lines
