"""Synthetic test scenes with ground-truth masks.

Geometry is laid out on an 80x80 reference canvas and scaled to the requested
size. Boundaries are anti-aliased by 4x4 supersampling of the analytic
inside test, giving a one-pixel intensity transition.

Reference layouts (80x80):

* ``ushape`` - a 48x48 U centred on the canvas, arms 12 px wide, 24 px wide
  mouth opening upward, 12 px thick base.
* ``two_rectangles`` - two 24x32 rectangles, 12 px apart and staggered
  vertically so that they face each other over 12 px.
* ``three_objects`` - a disc (r=13), a square (24x24) and a triangle.
* ``three_circle_arcs`` - three rings (outer radius 12, 8 px thick), each cut
  into three arcs by gaps of ``arc_gap_degrees``. The mask is the closed
  disc bounded by the outer radius.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .levelset import Circle

KINDS = ("ushape", "two_rectangles", "three_objects", "three_circle_arcs")
SUPERSAMPLE = 4
REF = 80.0

# 64-bit LCG (Knuth MMIX constants)
LCG_MULTIPLIER = 6364136223846793005
LCG_INCREMENT = 1442695040888963407
_MASK64 = (1 << 64) - 1


class SynthError(ValueError):
    pass


@dataclass
class SyntheticSpec:
    kind: str = "ushape"
    width: int = 80
    height: int = 80
    foreground: float = 200.0
    background: float = 50.0
    arc_gap_degrees: float = 10.0
    seed: int = 0
    noise_sigma: float = 0.0

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise SynthError(f"unknown synthetic kind {self.kind!r}; expected one of {KINDS}")
        if self.foreground == self.background:
            raise SynthError("foreground and background intensities must differ")
        if self.width < 32 or self.height < 32:
            raise SynthError("synthetic images must be at least 32x32")
        if self.noise_sigma < 0:
            raise SynthError("noise_sigma must be >= 0")
        if not 0 <= self.arc_gap_degrees < 120:
            raise SynthError("arc_gap_degrees must lie in [0, 120)")


def lcg_uniform(seed: int, n: int) -> np.ndarray:
    """``n`` uniforms in [0, 1) from the 64-bit LCG, top 53 bits per draw."""
    state = seed & _MASK64
    out = np.empty(n)
    for i in range(n):
        state = (LCG_MULTIPLIER * state + LCG_INCREMENT) & _MASK64
        out[i] = (state >> 11) / float(1 << 53)
    return out


def lcg_normal(seed: int, shape) -> np.ndarray:
    """Standard normals by Box-Muller on LCG uniforms."""
    n = int(np.prod(shape))
    u = lcg_uniform(seed, 2 * ((n + 1) // 2)).reshape(2, -1)
    u1 = np.maximum(u[0], 1e-300)
    r = np.sqrt(-2.0 * np.log(u1))
    z = np.concatenate([r * np.cos(2 * np.pi * u[1]), r * np.sin(2 * np.pi * u[1])])
    return z[:n].reshape(shape)


# --- scene geometry on the reference canvas ----------------------------------


def _rect(x, y, x0, y0, x1, y1):
    return (x >= x0) & (x <= x1) & (y >= y0) & (y <= y1)


def _disc(x, y, cx, cy, r):
    return (x - cx) ** 2 + (y - cy) ** 2 <= r * r


def _triangle(x, y, verts):
    (ax, ay), (bx, by), (cx, cy) = verts
    d1 = (x - bx) * (ay - by) - (ax - bx) * (y - by)
    d2 = (x - cx) * (by - cy) - (bx - cx) * (y - cy)
    d3 = (x - ax) * (cy - ay) - (cx - ax) * (y - ay)
    neg = (d1 < 0) | (d2 < 0) | (d3 < 0)
    pos = (d1 > 0) | (d2 > 0) | (d3 > 0)
    return ~(neg & pos)


# staggered so the facing edges overlap by 12 px, leaving an isolated saddle of g in the gap
RECT_LEFT = (10.0, 14.0, 34.0, 46.0)
RECT_RIGHT = (46.0, 34.0, 70.0, 66.0)
DISC = (22.0, 24.0, 13.0)
SQUARE = (44.0, 12.0, 68.0, 36.0)
TRIANGLE = ((44.0, 68.0), (72.0, 68.0), (58.0, 46.0))
RING_CENTERS = ((24.0, 25.0), (56.0, 25.0), (40.0, 55.0))
RING_OUTER = 12.0
# about twice the default edge-map sigma, so the two ring edges stay separable
RING_WIDTH = 8.0
# extra gap rotation applied to ring k, in degrees per ring
RING_GAP_TWIST = 40.0


def _ushape(x, y):
    outer = _rect(x, y, 16, 16, 64, 64)
    slot = _rect(x, y, 28, 15, 52, 52)
    return outer & ~slot


def _two_rectangles(x, y):
    return _rect(x, y, *RECT_LEFT) | _rect(x, y, *RECT_RIGHT)


def _three_objects(x, y):
    return _disc(x, y, *DISC) | _rect(x, y, *SQUARE) | _triangle(x, y, TRIANGLE)


def _ring_arcs(x, y, gap_deg, closed):
    out = np.zeros(x.shape, dtype=bool)
    half_gap = math.radians(gap_deg) / 2
    for k, (cx, cy) in enumerate(RING_CENTERS):
        r = np.hypot(x - cx, y - cy)
        if closed:
            out |= r <= RING_OUTER
            continue
        ring = (r <= RING_OUTER) & (r >= RING_OUTER - RING_WIDTH)
        theta = np.arctan2(y - cy, x - cx)
        # gaps centred at 90, 210 and 330 degrees, rotated per ring
        in_gap = np.zeros(x.shape, dtype=bool)
        for j in range(3):
            centre = math.radians(90 + 120 * j + RING_GAP_TWIST * k)
            dtheta = np.angle(np.exp(1j * (theta - centre)))
            in_gap |= np.abs(dtheta) * np.maximum(r, 1e-9) <= half_gap * RING_OUTER
        out |= ring & ~in_gap
    return out


def _inside(kind: str, x, y, gap_deg: float, mask: bool):
    if kind == "ushape":
        return _ushape(x, y)
    if kind == "two_rectangles":
        return _two_rectangles(x, y)
    if kind == "three_objects":
        return _three_objects(x, y)
    return _ring_arcs(x, y, gap_deg, closed=mask)


def coverage(spec: SyntheticSpec, mask: bool = False) -> np.ndarray:
    """Fraction of each pixel covered by the scene (or by its closed mask)."""
    h, w = spec.height, spec.width
    sx, sy = REF / w, REF / h
    offsets = (np.arange(SUPERSAMPLE) + 0.5) / SUPERSAMPLE - 0.5
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    acc = np.zeros((h, w))
    for oy in offsets:
        for ox in offsets:
            acc += _inside(spec.kind, (xs + ox + 0.5) * sx, (ys + oy + 0.5) * sy,
                           spec.arc_gap_degrees, mask)
    return acc / SUPERSAMPLE ** 2


def generate(spec: SyntheticSpec) -> tuple[np.ndarray, np.ndarray]:
    """Render ``(image, mask)``; the mask is 1 inside objects, 0 elsewhere."""
    spec.validate()
    cov = coverage(spec)
    image = spec.background + (spec.foreground - spec.background) * cov
    if spec.noise_sigma > 0:
        image = image + spec.noise_sigma * lcg_normal(spec.seed, image.shape)
    mask_cov = coverage(spec, mask=True) if spec.kind == "three_circle_arcs" else cov
    return image, (mask_cov >= 0.5).astype(np.float64)


def ground_truth_level_set(spec: SyntheticSpec) -> np.ndarray:
    """A field whose zero level set is the anti-aliased object boundary."""
    spec.validate()
    cov = coverage(spec, mask=True) if spec.kind == "three_circle_arcs" else coverage(spec)
    return 0.5 - cov


def standard_initializations(kind: str, width: int = 80, height: int = 80) -> list:
    """One circle per scene, partly inside and partly outside every object."""
    if kind not in KINDS:
        raise SynthError(f"unknown synthetic kind {kind!r}")
    sx, sy = width / REF, height / REF
    s = min(sx, sy)
    if kind == "ushape":
        return [Circle(40 * sx, 40 * sy, 28 * s)]
    # one circle cutting through every object's boundary
    cx, cy, r = {
        "two_rectangles": (40.0, 40.0, 24.0),
        "three_objects": (40.0, 40.0, 30.0),
        "three_circle_arcs": (40.0, 38.0, 26.0),
    }[kind]
    return [Circle(cx * sx, cy * sy, r * s)]


def mask_from_shapes(shapes, width: int, height: int) -> np.ndarray:
    from .levelset import init_from_shapes

    return (init_from_shapes(shapes, width, height) < 0).astype(np.float64)


__all__ = [
    "KINDS",
    "SyntheticSpec",
    "generate",
    "ground_truth_level_set",
    "standard_initializations",
    "lcg_uniform",
    "lcg_normal",
    "mask_from_shapes",
]
