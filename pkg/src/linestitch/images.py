"""PNG reading and writing (8-bit RGB/RGBA) via Pillow."""

from __future__ import annotations

import os

import numpy as np
from PIL import Image

from .errors import InputError


def load_png(path: str | os.PathLike) -> np.ndarray:
    """Read an image file as (H, W, 3) uint8 RGB."""
    try:
        with Image.open(path) as img:
            return np.asarray(img.convert("RGB"), dtype=np.uint8)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read image {path}: {exc}") from exc


def save_png(image: np.ndarray, path: str | os.PathLike) -> None:
    """Write (H, W), (H, W, 3) or (H, W, 4) uint8 data as PNG."""
    arr = np.asarray(image)
    if arr.dtype != np.uint8:
        raise InputError(f"save_png expects uint8 data, got {arr.dtype}")
    mode = {2: "L", 3: "RGB", 4: "RGBA"}.get(arr.ndim if arr.ndim == 2 else arr.shape[2])
    if mode is None:
        raise InputError(f"unsupported image shape {arr.shape}")
    Image.fromarray(arr, mode=mode).save(path, format="PNG")
