"""Alignment-quality metrics: windowed correlation and geometric error.

The correlation metric is the RMS of (1 - NCC) over the overlap region,
with NCC computed on 3x3 windows of the two grayscale rasters at the
same canvas pixel. The geometric error combines mean point transfer
error with mean endpoint-to-line distance, weighted by their counts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ValidationError

GRAY_WEIGHTS = np.array([0.299, 0.587, 0.114])


def to_gray(image: np.ndarray) -> np.ndarray:
    """Luma conversion in double precision; accepts gray, RGB or RGBA."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 2:
        return img
    return img[..., :3] @ GRAY_WEIGHTS


@dataclass
class OverlapMask:
    """Boolean canvas raster marking pixels valid in BOTH warped images."""

    mask: np.ndarray

    @property
    def count(self) -> int:
        return int(self.mask.sum())

    def shrunk(self) -> np.ndarray:
        """Mask eroded so every true pixel has a full 3x3 neighborhood."""
        m = self.mask
        out = np.zeros_like(m)
        if m.shape[0] < 3 or m.shape[1] < 3:
            return out
        inner = (
            m[1:-1, 1:-1]
            & m[:-2, :-2] & m[:-2, 1:-1] & m[:-2, 2:]
            & m[1:-1, :-2] & m[1:-1, 2:]
            & m[2:, :-2] & m[2:, 1:-1] & m[2:, 2:]
        )
        out[1:-1, 1:-1] = inner
        return out


def ncc_window(gray_a: np.ndarray, gray_b: np.ndarray, p) -> float:
    """NCC of the 3x3 windows centered at pixel p = (x, y).

    Both windows constant: 1 when the means agree within 1e-9, else 0;
    exactly one constant: 0. Raises when the window leaves either raster.
    """
    x, y = int(p[0]), int(p[1])
    h, w = gray_a.shape
    if not (1 <= x < w - 1 and 1 <= y < h - 1):
        raise ValidationError(f"pixel ({x}, {y}) has no full 3x3 neighborhood")
    wa = np.asarray(gray_a[y - 1:y + 2, x - 1:x + 2], dtype=np.float64)
    wb = np.asarray(gray_b[y - 1:y + 2, x - 1:x + 2], dtype=np.float64)
    da = wa - wa.mean()
    db = wb - wb.mean()
    na = float((da * da).sum())
    nb = float((db * db).sum())
    const_a = na < 1e-9
    const_b = nb < 1e-9
    if const_a and const_b:
        return 1.0 if abs(wa.mean() - wb.mean()) < 1e-9 else 0.0
    if const_a or const_b:
        return 0.0
    return float((da * db).sum() / np.sqrt(na * nb))


def correlation_metric(image_a: np.ndarray, image_b: np.ndarray,
                       overlap: OverlapMask) -> float:
    """sqrt(mean over the overlap of (1 - NCC)^2); 0 iff windows match.

    The overlap is shrunk by one pixel so every window is complete.
    """
    gray_a = to_gray(image_a)
    gray_b = to_gray(image_b)
    mask = overlap.shrunk()
    n = int(mask.sum())
    if n == 0:
        raise ValidationError("empty overlap after border shrink")
    ncc = kernels.ncc_map(gray_a, gray_b)
    vals = 1.0 - ncc[mask]
    return float(np.sqrt((vals * vals).sum() / n))


def mean_geometric_error(f, target_points: np.ndarray, canvas_points: np.ndarray,
                         line_segments: np.ndarray, line_coeffs: np.ndarray):
    """(err_p, err_l, err_mg) of a warp against canvas-frame references.

    ``f`` maps (N, 2) target coordinates to canvas coordinates.
    ``canvas_points`` are the matched reference points and
    ``line_coeffs`` the matched reference lines, both already expressed
    in the canvas frame; line_coeffs may be (K, 3) (one line for both
    endpoints) or (2K, 3) (head coefficients stacked over tail ones, for
    canvas frames that vary across the image). err_mg weights the two
    means by their counts (M points, 2K line endpoints).
    """
    target_points = np.asarray(target_points, dtype=np.float64).reshape(-1, 2)
    canvas_points = np.asarray(canvas_points, dtype=np.float64).reshape(-1, 2)
    line_segments = np.asarray(line_segments, dtype=np.float64).reshape(-1, 4)
    line_coeffs = np.asarray(line_coeffs, dtype=np.float64).reshape(-1, 3)
    m = target_points.shape[0]
    k = line_segments.shape[0]
    if m + k == 0:
        raise ValidationError("no correspondences to evaluate")
    if k and line_coeffs.shape[0] not in (k, 2 * k):
        raise ValidationError(
            f"line_coeffs must have K={k} or 2K={2 * k} rows, got {line_coeffs.shape[0]}"
        )

    err_p = 0.0
    if m:
        mapped = f(target_points)
        err_p = float(np.linalg.norm(mapped - canvas_points, axis=1).mean())
    err_l = 0.0
    if k:
        ends = np.vstack([line_segments[:, 0:2], line_segments[:, 2:4]])
        mapped = f(ends)
        coeffs = line_coeffs if line_coeffs.shape[0] == 2 * k else np.vstack([line_coeffs, line_coeffs])
        norms = np.hypot(coeffs[:, 0], coeffs[:, 1])
        d = np.abs(coeffs[:, 0] * mapped[:, 0] + coeffs[:, 1] * mapped[:, 1] + coeffs[:, 2]) / norms
        err_l = float(d.mean())
    err_mg = (err_p * m + err_l * 2 * k) / (m + 2 * k)
    return err_p, err_l, err_mg


def metric_report(cor: float | None, err_p: float, err_l: float, err_mg: float,
                  n_overlap: int, m_points: int, k_lines: int) -> dict:
    """The JSON-ready report dictionary with the exact contract keys."""
    return {
        "cor": cor,
        "err_p": err_p,
        "err_l": err_l,
        "err_mg": err_mg,
        "n_overlap": int(n_overlap),
        "m_points": int(m_points),
        "k_lines": int(k_lines),
    }
