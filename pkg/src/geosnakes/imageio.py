"""Grayscale image I/O and contour overlays.

Inputs may be 8/16-bit PGM or PNG; colour images are reduced to luminance
with the weights below. Outputs are 8-bit.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image
from skimage.draw import line

from .levelset import Contour

LUMA_WEIGHTS = (0.299, 0.587, 0.114)
OVERLAY_COLOR = (255, 0, 0)


class ImageReadError(OSError):
    pass


def read_image(path) -> np.ndarray:
    """Load an image as a float64 grayscale array."""
    path = Path(path)
    if not path.is_file():
        raise ImageReadError(f"no such image file: {path}")
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            arr = np.asarray(im)
    except (OSError, ValueError) as exc:
        raise ImageReadError(f"cannot read image {path}: {exc}") from exc
    if mode == "P":
        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGB"))
    arr = arr.astype(np.float64)
    if arr.ndim == 3:
        rgb = arr[..., :3]
        arr = rgb @ np.asarray(LUMA_WEIGHTS)
    if arr.ndim != 2 or arr.size == 0:
        raise ImageReadError(f"{path} is not a 2D image")
    return arr


def to_uint8(a, lo: float | None = None, hi: float | None = None) -> np.ndarray:
    """Linear map of ``[lo, hi]`` (default: data range) onto 0..255, clipped and rounded."""
    a = np.asarray(a, dtype=np.float64)
    lo = float(a.min()) if lo is None else lo
    hi = float(a.max()) if hi is None else hi
    if hi <= lo:
        return np.full(a.shape, 255 if lo > 0 else 0, dtype=np.uint8)
    return np.clip(np.rint((a - lo) * (255.0 / (hi - lo))), 0, 255).astype(np.uint8)


def write_gray(path, a: np.ndarray) -> None:
    """Write an 8-bit grayscale image; the suffix picks PGM (P5) or PNG."""
    a = np.asarray(a)
    if a.dtype != np.uint8:
        raise ValueError("write_gray expects uint8 data")
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        h, w = a.shape
        with open(path, "wb") as fh:
            fh.write(b"P5\n%d %d\n255\n" % (w, h))
            fh.write(np.ascontiguousarray(a).tobytes())
    else:
        Image.fromarray(a, mode="L").save(path, format="PNG")


def render_overlay(image: np.ndarray, contours: Sequence[Contour],
                   color=OVERLAY_COLOR) -> np.ndarray:
    """RGB rendering of ``image`` (scaled to its range) with 1-px contour polylines."""
    gray = to_uint8(image)
    rgb = np.repeat(gray[..., None], 3, axis=2)
    h, w = gray.shape
    for c in contours:
        pts = np.rint(c.points).astype(int)
        if c.closed and len(pts) > 1:
            pts = np.vstack([pts, pts[:1]])
        for (x0, y0), (x1, y1) in zip(pts[:-1], pts[1:]):
            rr, cc = line(y0, x0, y1, x1)
            keep = (rr >= 0) & (rr < h) & (cc >= 0) & (cc < w)
            rgb[rr[keep], cc[keep]] = color
        if len(pts) == 1:
            x, y = pts[0]
            if 0 <= y < h and 0 <= x < w:
                rgb[y, x] = color
    return rgb


def write_rgb_png(path, rgb: np.ndarray) -> None:
    # no timestamps or text chunks, so equal pixels give equal bytes
    Image.fromarray(np.ascontiguousarray(rgb, dtype=np.uint8), mode="RGB").save(
        path, format="PNG", optimize=False)
