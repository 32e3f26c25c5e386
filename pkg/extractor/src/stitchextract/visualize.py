"""Side-by-side visualization of a correspondence file."""

from __future__ import annotations

import json
import os

import cv2
import numpy as np


def _as_bgr(image: np.ndarray) -> np.ndarray:
    if image.ndim == 2:
        return cv2.cvtColor(image, cv2.COLOR_GRAY2BGR)
    return cv2.cvtColor(image, cv2.COLOR_RGB2BGR)


def visualize_matches(corr_path: str | os.PathLike, image_a: np.ndarray,
                      image_b: np.ndarray, out_path: str | os.PathLike) -> None:
    """Draw point and line matches on a side-by-side canvas and save it.

    Points get one circle per side plus a connecting stroke; line
    matches get their segments drawn on each side.
    """
    with open(corr_path, "r", encoding="utf-8") as fh:
        corr = json.load(fh)
    a = _as_bgr(image_a)
    b = _as_bgr(image_b)
    h = max(a.shape[0], b.shape[0])
    canvas = np.zeros((h, a.shape[1] + b.shape[1], 3), dtype=np.uint8)
    canvas[: a.shape[0], : a.shape[1]] = a
    canvas[: b.shape[0], a.shape[1]:] = b
    off = a.shape[1]

    for i, (x, y, xp, yp) in enumerate(corr.get("points", [])):
        color = (
            int(37 * (i + 1) % 255),
            int(91 * (i + 3) % 255),
            int(53 * (i + 7) % 255),
        )
        pa = (int(round(x)), int(round(y)))
        pb = (int(round(xp)) + off, int(round(yp)))
        cv2.circle(canvas, pa, 3, color, 1, cv2.LINE_AA)
        cv2.circle(canvas, pb, 3, color, 1, cv2.LINE_AA)
        cv2.line(canvas, pa, pb, color, 1, cv2.LINE_AA)

    for i, row in enumerate(corr.get("lines", [])):
        color = (
            int(71 * (i + 5) % 255),
            int(31 * (i + 11) % 255),
            int(97 * (i + 2) % 255),
        )
        x0, y0, x1, y1, u0, v0, u1, v1 = row
        cv2.line(canvas, (int(round(x0)), int(round(y0))),
                 (int(round(x1)), int(round(y1))), color, 2, cv2.LINE_AA)
        cv2.line(canvas, (int(round(u0)) + off, int(round(v0))),
                 (int(round(u1)) + off, int(round(v1))), color, 2, cv2.LINE_AA)

    cv2.imwrite(str(out_path), canvas)
