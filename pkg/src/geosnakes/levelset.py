"""Level-set representation of the evolving contour.

Convention: ``phi < 0`` inside, ``phi > 0`` outside, so ``grad phi`` and the
normal field point outward. Contours are polylines of ``(x, y)`` pixel
coordinates oriented with the inside on the left, i.e. the +90 degree
rotation of the tangent (see ``fields.rotate90``) points inward.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from skimage import measure

from .fields import (
    VectorField,
    as_scalar_field,
    bilinear_sample,
    gradient_central,
    one_sided_differences,
)

CURVATURE_EPS = 1e-8
REINIT_DT = 0.3


class ReinitializationError(RuntimeError):
    """Reinitialisation moved the zero level set further than allowed."""


# --- initial shapes ---------------------------------------------------------


@dataclass(frozen=True)
class Circle:
    cx: float
    cy: float
    r: float
    inside: bool = True

    def distance(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.hypot(x - self.cx, y - self.cy) - self.r


@dataclass(frozen=True)
class Rectangle:
    """Axis-aligned box spanning ``[x0, x1] x [y0, y1]``."""

    x0: float
    y0: float
    x1: float
    y1: float
    inside: bool = True

    def distance(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        cx, cy = (self.x0 + self.x1) / 2, (self.y0 + self.y1) / 2
        hx, hy = (self.x1 - self.x0) / 2, (self.y1 - self.y0) / 2
        qx = np.abs(x - cx) - hx
        qy = np.abs(y - cy) - hy
        outside = np.hypot(np.maximum(qx, 0), np.maximum(qy, 0))
        return outside + np.minimum(np.maximum(qx, qy), 0)


@dataclass(frozen=True)
class Polygon:
    vertices: tuple[tuple[float, float], ...]
    inside: bool = True

    def distance(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        pts = np.asarray(self.vertices, dtype=np.float64)
        dist = _distance_to_polyline(np.stack([x.ravel(), y.ravel()], axis=1), pts, closed=True)
        sign = np.where(_points_in_polygon(x.ravel(), y.ravel(), pts), -1.0, 1.0)
        return (sign * dist).reshape(x.shape)


def _points_in_polygon(x: np.ndarray, y: np.ndarray, pts: np.ndarray) -> np.ndarray:
    inside = np.zeros(x.shape, dtype=bool)
    n = len(pts)
    for i in range(n):
        xa, ya = pts[i]
        xb, yb = pts[(i + 1) % n]
        crosses = (ya > y) != (yb > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = xa + (y - ya) * (xb - xa) / (yb - ya)
        inside ^= crosses & (x < xint)
    return inside


def _distance_to_polyline(points: np.ndarray, verts: np.ndarray, closed: bool) -> np.ndarray:
    """Euclidean distance from each of ``points`` (N, 2) to a polyline."""
    a = verts
    b = np.roll(verts, -1, axis=0) if closed else verts[1:]
    if not closed:
        a = verts[:-1]
    best = np.full(len(points), np.inf)
    # chunk over segments to bound memory
    for start in range(0, len(a), 256):
        sa, sb = a[start:start + 256], b[start:start + 256]
        d = sb - sa
        len2 = np.maximum(np.einsum("ij,ij->i", d, d), 1e-300)
        rel = points[:, None, :] - sa[None, :, :]
        t = np.clip(np.einsum("nij,ij->ni", rel, d) / len2, 0.0, 1.0)
        proj = sa[None, :, :] + t[..., None] * d[None, :, :]
        dist = np.hypot(points[:, None, 0] - proj[..., 0], points[:, None, 1] - proj[..., 1])
        best = np.minimum(best, dist.min(axis=1))
    return best


def init_from_shapes(shapes: Sequence, width: int, height: int) -> np.ndarray:
    """Signed distance of the union of ``shapes`` (pointwise minimum).

    A shape with ``inside=False`` contributes its complement.
    """
    if not shapes:
        raise ValueError("at least one shape is required")
    y, x = np.mgrid[0:height, 0:width].astype(np.float64)
    phi = None
    for shape in shapes:
        d = shape.distance(x, y)
        if not shape.inside:
            d = -d
        phi = d if phi is None else np.minimum(phi, d)
    return phi


# --- differential geometry ---------------------------------------------------


def curvature(phi) -> np.ndarray:
    """``div(grad phi / |grad phi|)`` by central differences, clamped to [-1, 1].

    Positive on convex parts of the inside region (a circle of radius ``r``
    gives ``1/r``).
    """
    phi = as_scalar_field(phi, "phi")
    p = np.pad(phi, 1, mode="reflect", reflect_type="odd")
    c = p[1:-1, 1:-1]
    px = (p[1:-1, 2:] - p[1:-1, :-2]) / 2
    py = (p[2:, 1:-1] - p[:-2, 1:-1]) / 2
    pxx = p[1:-1, 2:] - 2 * c + p[1:-1, :-2]
    pyy = p[2:, 1:-1] - 2 * c + p[:-2, 1:-1]
    pxy = (p[2:, 2:] - p[2:, :-2] - p[:-2, 2:] + p[:-2, :-2]) / 4
    num = pxx * py ** 2 - 2 * px * py * pxy + pyy * px ** 2
    den = (px ** 2 + py ** 2) ** 1.5 + CURVATURE_EPS
    return np.clip(num / den, -1.0, 1.0)


def central_gradient_norm(phi: np.ndarray) -> np.ndarray:
    g = gradient_central(phi)
    return g.norm()


def normal_field(phi) -> VectorField:
    """Outward unit normal ``grad phi / (|grad phi| + 1e-12)``."""
    grad = gradient_central(phi)
    n = grad.norm() + 1e-12
    return VectorField(grad.u / n, grad.v / n)


def dirac_approx(x):
    """Compactly supported delta: ``(1 + cos(pi x)) / 2`` on ``|x| <= 1``, else 0."""
    x = np.asarray(x, dtype=np.float64)
    out = np.where(np.abs(x) <= 1.0, 0.5 * (1.0 + np.cos(np.pi * x)), 0.0)
    return float(out) if out.ndim == 0 else out


def heaviside_eps(x, eps: float = 1.5):
    """Smoothed Heaviside of the region-based model: ``(1 + 2/pi atan(x/eps)) / 2``."""
    return 0.5 * (1.0 + (2.0 / np.pi) * np.arctan(np.asarray(x, dtype=np.float64) / eps))


def dirac_eps(x, eps: float = 1.5):
    """Derivative of ``heaviside_eps``: ``eps / (pi (eps^2 + x^2))``."""
    x = np.asarray(x, dtype=np.float64)
    return eps / (np.pi * (eps * eps + x * x))


# --- reinitialisation ----------------------------------------------------------


def _godunov_norm(phi: np.ndarray, sign: np.ndarray) -> np.ndarray:
    a, b, c, d = one_sided_differences(phi)
    pos = np.sqrt(
        np.maximum(np.maximum(a, 0) ** 2, np.minimum(b, 0) ** 2)
        + np.maximum(np.maximum(c, 0) ** 2, np.minimum(d, 0) ** 2)
    )
    neg = np.sqrt(
        np.maximum(np.minimum(a, 0) ** 2, np.maximum(b, 0) ** 2)
        + np.maximum(np.minimum(c, 0) ** 2, np.maximum(d, 0) ** 2)
    )
    return np.where(sign > 0, pos, np.where(sign < 0, neg, 0.0))


def _interface_anchor(phi0: np.ndarray):
    """Pixels adjacent to the zero level set and their subcell signed distance.

    The distance estimate ``phi0 / |grad phi0|`` uses the largest of the
    central and one-sided slopes (Russo-Smereka), which keeps the interface
    from drifting while the far field is relaxed.
    """
    p = np.pad(phi0, 1, mode="edge")
    c = p[1:-1, 1:-1]
    nbrs = (p[1:-1, 2:], p[1:-1, :-2], p[2:, 1:-1], p[:-2, 1:-1])
    near = np.zeros(phi0.shape, dtype=bool)
    for n in nbrs:
        near |= c * n < 0
    central = np.hypot((nbrs[0] - nbrs[1]) / 2, (nbrs[2] - nbrs[3]) / 2)
    slope = np.maximum.reduce([central] + [np.abs(n - c) for n in nbrs] + [np.full_like(c, 1e-12)])
    return near, phi0 / slope


def reinitialize(
    phi,
    iterations: int = 20,
    dt: float = REINIT_DT,
    max_shift: float | None = 0.5,
) -> np.ndarray:
    """Relax ``phi`` toward a signed distance function.

    Iterates ``phi_t = S(phi0) (1 - |grad phi|)`` with first-order Godunov
    upwinding and ``S(x) = x / sqrt(x^2 + 1)``. When ``max_shift`` is set the
    zero level sets before and after are compared and a
    ``ReinitializationError`` is raised if any new contour vertex lies
    further than ``max_shift`` pixels from the old contour.
    """
    phi0 = as_scalar_field(phi, "phi")
    sign = phi0 / np.sqrt(phi0 * phi0 + 1.0)
    near, anchor = _interface_anchor(phi0)
    exact_sign = np.sign(phi0)
    out = phi0.copy()
    for _ in range(iterations):
        far = out + dt * sign * (1.0 - _godunov_norm(out, sign))
        # pixels next to a sign change are pulled toward their subcell distance
        fixed = out - dt * (exact_sign * np.abs(out) - anchor)
        out = np.where(near, fixed, far)
    if max_shift is not None and iterations > 0:
        shift = zero_level_shift(phi0, out)
        if shift > max_shift:
            raise ReinitializationError(
                f"zero level set moved {shift:.3f} px during reinitialisation (limit {max_shift})"
            )
    return out


def zero_level_shift(before: np.ndarray, after: np.ndarray) -> float:
    """Largest distance from a vertex of the new zero level set to the old one."""
    old = extract_contour(before)
    new = extract_contour(after)
    if not new:
        return 0.0
    if not old:
        return math.inf
    pts = np.concatenate([c.points for c in new])
    return float(distance_to_contours(pts, old).max())


# --- contours -------------------------------------------------------------------


@dataclass
class Contour:
    """Closed polyline of subpixel ``(x, y)`` points, inside on the left."""

    points: np.ndarray
    closed: bool = True
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 2)
        if self.closed and len(self.points) < 3:
            raise ValueError("a closed contour needs at least 3 points")

    def __len__(self) -> int:
        return len(self.points)

    @property
    def x(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self.points[:, 1]

    def length(self) -> float:
        pts = np.vstack([self.points, self.points[:1]]) if self.closed else self.points
        seg = np.diff(pts, axis=0)
        return float(np.hypot(seg[:, 0], seg[:, 1]).sum())

    def signed_area(self) -> float:
        x, y = self.x, self.y
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    def tangents(self) -> np.ndarray:
        """Unit tangents from central differences of neighbouring points."""
        if self.closed:
            d = np.roll(self.points, -1, axis=0) - np.roll(self.points, 1, axis=0)
        else:
            d = np.gradient(self.points, axis=0)
        n = np.hypot(d[:, 0], d[:, 1])
        n[n == 0] = 1.0
        return d / n[:, None]

    def inward_normals(self) -> np.ndarray:
        """+90 degree rotation of the tangents: points into ``phi < 0``."""
        t = self.tangents()
        return np.stack([-t[:, 1], t[:, 0]], axis=1)

    def reversed(self) -> Contour:
        return Contour(self.points[::-1].copy(), self.closed)


def extract_contour(phi) -> list[Contour]:
    """Marching squares on the zero level set of ``phi``.

    The field is padded with a positive border so that every component is
    closed; components touching the grid edge are closed along it.
    """
    phi = as_scalar_field(phi, "phi")
    if phi.min() >= 0 or phi.max() <= 0:
        return []
    h, w = phi.shape
    pad_value = max(float(phi.max()), 1.0)
    padded = np.pad(phi, 1, mode="constant", constant_values=pad_value)
    contours = []
    for rc in measure.find_contours(padded, 0.0):
        pts = np.stack([rc[:, 1] - 1, rc[:, 0] - 1], axis=1)
        pts[:, 0] = np.clip(pts[:, 0], 0, w - 1)
        pts[:, 1] = np.clip(pts[:, 1], 0, h - 1)
        if len(pts) > 1 and np.allclose(pts[0], pts[-1]):
            pts = pts[:-1]
        keep = np.ones(len(pts), dtype=bool)
        keep[1:] = np.any(np.abs(np.diff(pts, axis=0)) > 1e-12, axis=1)
        pts = pts[keep]
        if len(pts) < 3:
            continue
        c = Contour(pts)
        if _inside_on_right(c, phi):
            c = c.reversed()
        contours.append(c)
    return contours


def _inside_on_right(c: Contour, phi: np.ndarray) -> bool:
    n = c.inward_normals()
    left = bilinear_sample(phi, c.x + 0.25 * n[:, 0], c.y + 0.25 * n[:, 1])
    right = bilinear_sample(phi, c.x - 0.25 * n[:, 0], c.y - 0.25 * n[:, 1])
    return float(np.sum(left - right)) > 0


def distance_to_contours(points: np.ndarray, contours: Iterable[Contour]) -> np.ndarray:
    """Distance from each point to the nearest segment of any contour."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    best = np.full(len(points), np.inf)
    for c in contours:
        best = np.minimum(best, _distance_to_polyline(points, c.points, c.closed))
    return best


def hausdorff_distance(a: Sequence[Contour], b: Sequence[Contour]) -> float:
    """Symmetric Hausdorff distance between two contour sets (vertex-to-segment)."""
    if not a or not b:
        return math.inf
    pa = np.concatenate([c.points for c in a])
    pb = np.concatenate([c.points for c in b])
    return float(max(distance_to_contours(pa, b).max(), distance_to_contours(pb, a).max()))


def contour_length(contours: Iterable[Contour]) -> float:
    return sum(c.length() for c in contours)


def write_contours(path, contours: Sequence[Contour]) -> None:
    """One block of ``x y`` lines per contour, blocks separated by a blank line."""
    blocks = ["\n".join(f"{x:.6f} {y:.6f}" for x, y in c.points) for c in contours]
    Path(path).write_text("\n\n".join(blocks) + ("\n" if blocks else ""))


def read_contours(path) -> list[Contour]:
    contours = []
    for block in Path(path).read_text().split("\n\n"):
        rows = [line.split() for line in block.strip().splitlines() if line.strip()]
        if rows:
            contours.append(Contour(np.array(rows, dtype=np.float64)))
    return contours
