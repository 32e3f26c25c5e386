"""Deterministic synthetic scenes with known ground-truth warps.

Scenes are defined by one or more planar regions of the target image,
each carrying its own ground-truth homography. Point and line matches
are sampled inside the regions, mapped by the region's homography, and
optionally corrupted with Gaussian noise and uniform outliers. All
randomness flows through the counter-based generator, so a seed fully
determines the output on any platform.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .correspondences import CorrespondenceSet
from .errors import ValidationError
from .geometry import SimilarityTransform, apply_homography_batch
from .rng import CounterStream, hash_u64


@dataclass
class SceneSpec:
    """Blueprint for one synthetic target/reference pair.

    ``planes`` maps a region rectangle (x0, y0, x1, y1) of the target
    image to its ground-truth 3x3 homography. ``n_points``/``n_lines``
    are per plane. ``noise_sigma`` perturbs reference-side coordinates;
    ``outlier_fraction`` of all point matches get their reference point
    replaced by a uniform random location.
    """

    seed: int
    planes: list = field(default_factory=list)  # [(H, (x0, y0, x1, y1)), ...]
    n_points: int = 40
    n_lines: int = 0
    noise_sigma: float = 0.0
    outlier_fraction: float = 0.0
    image_size: tuple[int, int] = (320, 240)
    min_line_length: float = 15.0


@dataclass
class GroundTruth:
    homographies: list            # per plane, 3x3
    point_plane: np.ndarray       # (M,) plane index per point match
    line_plane: np.ndarray        # (K,) plane index per line match
    outlier_indices: np.ndarray   # indices into the point matches
    clean_points: np.ndarray      # (M, 4) matches before noise/outliers
    clean_lines: np.ndarray       # (K, 8) matches before noise


def random_homography(stream: CounterStream, perspective: float = 5e-4,
                      scale_range=(0.8, 1.25), translation: float = 60.0) -> np.ndarray:
    """Well-conditioned homography: random similarity plus a mild perspective row."""
    s = stream.uniform(1, *scale_range)[0]
    th = stream.uniform(1, -0.4, 0.4)[0]
    tx, ty = stream.uniform(2, -translation, translation)
    H = SimilarityTransform(s, th, tx, ty).as_matrix()
    H[2, 0], H[2, 1] = stream.uniform(2, -perspective, perspective)
    return H


def single_plane_scene(seed: int, H: np.ndarray | None = None, n_points: int = 40,
                       n_lines: int = 0, noise_sigma: float = 0.0,
                       outlier_fraction: float = 0.0,
                       image_size: tuple[int, int] = (320, 240)) -> SceneSpec:
    w, h = image_size
    if H is None:
        H = random_homography(CounterStream(hash_u64(seed, 1)))
    return SceneSpec(
        seed=seed,
        planes=[(np.asarray(H, dtype=np.float64), (0.0, 0.0, w - 1.0, h - 1.0))],
        n_points=n_points,
        n_lines=n_lines,
        noise_sigma=noise_sigma,
        outlier_fraction=outlier_fraction,
        image_size=image_size,
    )


def two_plane_scene(seed: int, H_left: np.ndarray, H_right: np.ndarray,
                    n_points: int = 150, n_lines: int = 0,
                    noise_sigma: float = 0.0,
                    image_size: tuple[int, int] = (320, 240)) -> SceneSpec:
    """Vertical 50% split: left half follows H_left, right half H_right."""
    w, h = image_size
    mid = (w - 1.0) / 2.0
    return SceneSpec(
        seed=seed,
        planes=[
            (np.asarray(H_left, dtype=np.float64), (0.0, 0.0, mid, h - 1.0)),
            (np.asarray(H_right, dtype=np.float64), (mid, 0.0, w - 1.0, h - 1.0)),
        ],
        n_points=n_points,
        n_lines=n_lines,
        noise_sigma=noise_sigma,
        image_size=image_size,
    )


def perspective_scene(seed: int, image_size: tuple[int, int] = (320, 240),
                      n_points: int = 60, n_lines: int = 12,
                      noise_sigma: float = 0.3) -> SceneSpec:
    """Perspective-heavy half-overlap pair for distortion experiments.

    The reference sees the LEFT half of the target, where the warp's
    Jacobian is near 1 (the homogeneous divisor w = 1 + h7 x is ~1 for
    small x). Extrapolating the projective warp rightward into the
    non-overlap half compresses scale by up to (1 + h7 W)^-3, which is
    the distortion the similarity constraint is meant to tame.
    Correspondences exist only inside the overlap half.
    """
    w, h = image_size
    stream = CounterStream(hash_u64(seed, 5))
    s = stream.uniform(1, 0.98, 1.02)[0]
    th = stream.uniform(1, -0.03, 0.03)[0]
    ty = stream.uniform(1, -8, 8)[0]
    H = SimilarityTransform(s, th, w / 2.0, ty).as_matrix()
    H[2, 0] = stream.uniform(1, 0.8e-3, 1.3e-3)[0]
    H[2, 1] = stream.uniform(1, -1e-4, 1e-4)[0]
    return SceneSpec(
        seed=seed,
        planes=[(H, (0.0, 0.0, (w - 1.0) / 2.0, h - 1.0))],
        n_points=n_points,
        n_lines=n_lines,
        noise_sigma=noise_sigma,
        image_size=image_size,
    )


def _sample_points_in_rect(stream: CounterStream, rect, n: int) -> np.ndarray:
    x0, y0, x1, y1 = rect
    xs = stream.uniform(n, x0, x1)
    ys = stream.uniform(n, y0, y1)
    return np.column_stack([xs, ys])


def _sample_segments_in_rect(stream: CounterStream, rect, n: int, min_len: float) -> np.ndarray:
    """(n, 4) segments with both endpoints in the rect and length >= min_len."""
    segs = np.empty((n, 4))
    got = 0
    while got < n:
        p0 = _sample_points_in_rect(stream, rect, 1)[0]
        p1 = _sample_points_in_rect(stream, rect, 1)[0]
        if np.hypot(*(p1 - p0)) >= min_len:
            segs[got] = [p0[0], p0[1], p1[0], p1[1]]
            got += 1
    return segs


def generate(spec: SceneSpec) -> tuple[CorrespondenceSet, GroundTruth]:
    """Sample the correspondence set and its ground truth for a scene."""
    if not spec.planes:
        raise ValidationError("scene has no planes")
    for _, (x0, y0, x1, y1) in spec.planes:
        if x1 <= x0 or y1 <= y0:
            raise ValidationError("empty plane region")

    root = CounterStream(spec.seed)
    pt_blocks, ln_blocks, pt_plane, ln_plane = [], [], [], []
    for pi, (H, rect) in enumerate(spec.planes):
        pstream = root.split(10 + 3 * pi)
        tgt = _sample_points_in_rect(pstream, rect, spec.n_points)
        ref = apply_homography_batch(H, tgt)
        pt_blocks.append(np.hstack([tgt, ref]))
        pt_plane += [pi] * spec.n_points
        if spec.n_lines:
            lstream = root.split(11 + 3 * pi)
            tgt_segs = _sample_segments_in_rect(lstream, rect, spec.n_lines, spec.min_line_length)
            ref0 = apply_homography_batch(H, tgt_segs[:, 0:2])
            ref1 = apply_homography_batch(H, tgt_segs[:, 2:4])
            ln_blocks.append(np.hstack([tgt_segs, ref0, ref1]))
            ln_plane += [pi] * spec.n_lines

    points = np.vstack(pt_blocks) if pt_blocks else np.empty((0, 4))
    lines = np.vstack(ln_blocks) if ln_blocks else np.empty((0, 8))
    clean_points = points.copy()
    clean_lines = lines.copy()

    noise = root.split(50)
    if spec.noise_sigma > 0:
        if points.size:
            points[:, 2:4] += noise.normal(2 * points.shape[0], spec.noise_sigma).reshape(-1, 2)
        if lines.size:
            lines[:, 4:8] += noise.normal(4 * lines.shape[0], spec.noise_sigma).reshape(-1, 4)

    n_out = int(round(spec.outlier_fraction * points.shape[0]))
    outlier_idx = np.empty(0, dtype=int)
    if n_out:
        ostream = root.split(60)
        outlier_idx = np.sort(ostream.choice(points.shape[0], n_out))
        w, h = spec.image_size
        points[outlier_idx, 2] = ostream.uniform(n_out, 0, w - 1.0)
        points[outlier_idx, 3] = ostream.uniform(n_out, 0, h - 1.0)

    cs = CorrespondenceSet(
        points=points,
        lines=lines,
        target_size=spec.image_size,
        reference_size=spec.image_size,
    )
    gt = GroundTruth(
        homographies=[H for H, _ in spec.planes],
        point_plane=np.array(pt_plane, dtype=int),
        line_plane=np.array(ln_plane, dtype=int),
        outlier_indices=outlier_idx,
        clean_points=clean_points,
        clean_lines=clean_lines,
    )
    return cs, gt


def _texture(name: str, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Procedural RGB texture evaluated at float coordinates, uint8 output."""
    if name == "plasma":
        # low-frequency base plus mid-frequency detail so 3x3 windows are
        # never flat (flat windows make the correlation metric collapse
        # into quantization noise)
        detail_r = 14.0 * np.sin(0.41 * x + 0.23 * y) + 10.0 * np.cos(0.29 * x - 0.37 * y)
        detail_g = 14.0 * np.sin(0.37 * x - 0.29 * y + 0.8) + 10.0 * np.cos(0.43 * x + 0.21 * y)
        detail_b = 14.0 * np.sin(0.23 * x + 0.43 * y + 1.9) + 10.0 * np.cos(0.31 * x - 0.27 * y)
        r = 127.5 + 45.0 * np.sin(0.041 * x + 0.019 * y) + 40.0 * np.sin(0.013 * x - 0.027 * y + 1.7) + detail_r
        g = 127.5 + 45.0 * np.sin(0.023 * x - 0.031 * y + 0.6) + 40.0 * np.cos(0.037 * x + 0.011 * y) + detail_g
        b = 127.5 + 45.0 * np.cos(0.029 * x + 0.023 * y + 2.4) + 40.0 * np.sin(0.017 * x + 0.035 * y) + detail_b
    elif name == "checker":
        c = 255.0 * (((np.floor(x / 16.0) + np.floor(y / 16.0)) % 2.0))
        r = g = b = c
    else:
        raise ValidationError(f"unknown texture '{name}'")
    return np.clip(np.stack([r, g, b], axis=-1), 0, 255).astype(np.uint8)


def render_pair(spec: SceneSpec, texture: str = "plasma") -> tuple[np.ndarray, np.ndarray]:
    """Render (target, reference) rasters consistent with the ground truth.

    The target samples the texture directly. Each reference pixel pulls
    the texture through the inverse homography of the plane whose region
    contains its back-projection; pixels seen by no region extend the
    first plane, so single-plane scenes are smooth everywhere.
    """
    w, h = spec.image_size
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    target = _texture(texture, xs, ys)

    filled = np.zeros((h, w), dtype=bool)
    tx = np.zeros((h, w))
    ty = np.zeros((h, w))
    for H, (x0, y0, x1, y1) in spec.planes:
        Hinv = np.linalg.inv(H)
        wcomp = Hinv[2, 0] * xs + Hinv[2, 1] * ys + Hinv[2, 2]
        wcomp = np.where(np.abs(wcomp) < 1e-12, np.nan, wcomp)
        bx = (Hinv[0, 0] * xs + Hinv[0, 1] * ys + Hinv[0, 2]) / wcomp
        by = (Hinv[1, 0] * xs + Hinv[1, 1] * ys + Hinv[1, 2]) / wcomp
        inside = (bx >= x0) & (bx < x1) & (by >= y0) & (by < y1) & ~filled
        tx[inside] = bx[inside]
        ty[inside] = by[inside]
        filled |= inside
    if not filled.all():
        Hinv = np.linalg.inv(spec.planes[0][0])
        rest = ~filled
        wcomp = Hinv[2, 0] * xs[rest] + Hinv[2, 1] * ys[rest] + Hinv[2, 2]
        tx[rest] = (Hinv[0, 0] * xs[rest] + Hinv[0, 1] * ys[rest] + Hinv[0, 2]) / wcomp
        ty[rest] = (Hinv[1, 0] * xs[rest] + Hinv[1, 1] * ys[rest] + Hinv[1, 2]) / wcomp
    reference = _texture(texture, tx, ty)
    return target, reference
