"""Geometric diagnostics: critical points of the edge indicator, pseudo-stationarity
classification of converged contours, and level-line residence checks."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .fields import VectorField, as_scalar_field, bilinear_sample
from .levelset import Contour, curvature, dirac_approx

SADDLE = "saddle"
EXTREMUM = "extremum"
DEGENERATE = "degenerate"
DEDUP_RADIUS = 2.0
DEFAULT_GRAD_FRACTION = 0.02
DEFAULT_PSP_RATIO = 10.0
# |det H| below this fraction of |H|^2 (Frobenius) counts as degenerate
DEGENERATE_FRACTION = 1e-3
# candidates whose |H| is below this fraction of the grid maximum sit on flat plateaus
FLAT_FRACTION = 1e-3


@dataclass(frozen=True)
class CriticalPoint:
    x: float
    y: float
    kind: str
    gradient_norm: float
    hessian_det: float


def _derivatives(g: np.ndarray):
    gy, gx = np.gradient(g)
    gxy, gxx = np.gradient(gx)
    gyy, _ = np.gradient(gy)
    return gx, gy, gxx, gyy, gxy


def _half_grid(a: np.ndarray) -> np.ndarray:
    """Bilinear upsampling onto the grid of pixel centres and cell midpoints."""
    h, w = a.shape
    out = np.empty((2 * h - 1, 2 * w - 1))
    out[::2, ::2] = a
    out[1::2, ::2] = 0.5 * (a[:-1] + a[1:])
    out[:, 1::2] = 0.5 * (out[:, :-1:2] + out[:, 2::2])
    return out


def find_critical_points(g, grad_tol: float | None = None) -> list[CriticalPoint]:
    """Critical points of ``g`` away from the grid border.

    Derivatives are central differences, interpolated bilinearly onto a
    half-pixel grid so that stationary points lying between pixel centres
    (thin ridges, symmetric gaps) are not missed. Candidates are local minima
    of the gradient norm below ``grad_tol``; each is refined by one Newton step
    of the local quadratic model when that step stays within a quarter pixel,
    and classified by the sign of the Hessian determinant. Plateaus where the
    Hessian is negligible against its grid maximum are skipped. Within 2 px
    only the point with the smallest gradient is kept.

    ``grad_tol`` defaults to ``0.02 * max |grad g|``; a constant field has no
    critical points.
    """
    g = as_scalar_field(g, "g")
    derivs = [_half_grid(d) for d in _derivatives(g)]
    gx, gy, gxx, gyy, gxy = derivs
    gnorm = np.hypot(gx, gy)
    if grad_tol is None:
        grad_tol = DEFAULT_GRAD_FRACTION * float(np.hypot(*_derivatives(g)[:2]).max())
    if grad_tol <= 0:
        return []
    span = float(g.max() - g.min())
    g_half = _half_grid(g)
    hnorm = np.sqrt(gxx ** 2 + gyy ** 2 + 2 * gxy ** 2)
    curved = hnorm >= FLAT_FRACTION * float(hnorm.max())

    inner = gnorm[2:-2, 2:-2]
    windows = np.lib.stride_tricks.sliding_window_view(gnorm, (3, 3))[1:-1, 1:-1]
    local_min = inner <= windows.min(axis=(2, 3))
    g_windows = np.lib.stride_tricks.sliding_window_view(g_half, (5, 5))
    varies = np.ptp(g_windows, axis=(2, 3)) > 1e-9 * span
    rows, cols = np.nonzero((inner < grad_tol) & local_min & varies & curved[2:-2, 2:-2])
    rows, cols = rows + 2, cols + 2

    found = []
    for r, c in zip(rows, cols):
        H = np.array([[gxx[r, c], gxy[r, c]], [gxy[r, c], gyy[r, c]]])
        det = float(gxx[r, c] * gyy[r, c] - gxy[r, c] ** 2)
        degenerate = abs(det) <= DEGENERATE_FRACTION * float(np.sum(H * H))
        x, y = 0.5 * float(c), 0.5 * float(r)
        norm = float(gnorm[r, c])
        if not degenerate:
            dx, dy = -np.linalg.solve(H, [gx[r, c], gy[r, c]])
            if abs(dx) <= 0.25 and abs(dy) <= 0.25:
                nx, ny = x + float(dx), y + float(dy)
                gxs, gys = _derivatives(g)[:2]
                refined = float(np.hypot(bilinear_sample(gxs, nx, ny), bilinear_sample(gys, nx, ny)))
                if refined < norm:
                    x, y, norm = nx, ny, refined
        if degenerate:
            kind = DEGENERATE
        elif det < 0:
            kind = SADDLE
        else:
            kind = EXTREMUM
        found.append(CriticalPoint(x, y, kind, norm, det))

    found.sort(key=lambda p: (p.gradient_norm, p.y, p.x))
    kept: list[CriticalPoint] = []
    for p in found:
        if all(np.hypot(p.x - q.x, p.y - q.y) >= DEDUP_RADIUS for q in kept):
            kept.append(p)
    kept.sort(key=lambda p: (p.y, p.x))
    return kept


def write_critical_points(path, points: Sequence[CriticalPoint]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y", "kind", "grad_norm", "hess_det"])
        for p in points:
            w.writerow([repr(p.x), repr(p.y), p.kind, repr(p.gradient_norm), repr(p.hessian_det)])


def read_critical_points(path) -> list[CriticalPoint]:
    with open(path, newline="") as fh:
        return [CriticalPoint(float(r["x"]), float(r["y"]), r["kind"], float(r["grad_norm"]),
                              float(r["hess_det"])) for r in csv.DictReader(fh)]


@dataclass
class PSPReport:
    """Residual sums of the stationarity condition along one or more contours."""

    tangential_residual: float
    normal_residual: float
    tol: float
    ratio: float
    points: int

    @property
    def is_stationary_full(self) -> bool:
        return self.normal_residual < self.tol and self.tangential_residual < self.tol

    @property
    def is_stationary_normal_only(self) -> bool:
        return (self.normal_residual < self.tol
                and self.tangential_residual >= self.ratio * self.tol)

    @property
    def label(self) -> str:
        if self.is_stationary_normal_only:
            return "PSP"
        if self.is_stationary_full:
            return "stationary"
        return "moving"

    def as_dict(self) -> dict:
        return {
            "is_stationary_full": self.is_stationary_full,
            "is_stationary_normal_only": self.is_stationary_normal_only,
            "tangential_residual": self.tangential_residual,
            "normal_residual": self.normal_residual,
            "tol": self.tol,
            "ratio": self.ratio,
            "points": self.points,
            "label": self.label,
        }

    def to_text(self) -> str:
        return "".join(f"{k}={v!r}\n" if isinstance(v, float) else f"{k}={v}\n"
                       for k, v in self.as_dict().items())


def _oriented_normals(contour: Contour, phi: np.ndarray | None) -> np.ndarray:
    n = contour.inward_normals()
    if phi is not None:
        # probe half a pixel along the claimed inward normal
        px = contour.x + 0.5 * n[:, 0]
        py = contour.y + 0.5 * n[:, 1]
        inside_votes = np.mean(bilinear_sample(phi, px, py) < 0)
        return n if inside_votes >= 0.5 else -n
    # without phi assume the contour bounds its interior (outer boundary)
    return n if contour.signed_area() >= 0 else -n


def psp_residuals(contour: Contour, g: np.ndarray, F: VectorField, kappa_on_contour,
                  phi: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Per-point ``|<F, T>|`` and ``|g kappa + <F, N>|`` with ``N`` the inward normal."""
    if not contour.closed:
        raise ValueError("stationarity residuals need a closed contour")
    kappa = np.asarray(kappa_on_contour, dtype=np.float64)
    if kappa.shape != (len(contour),):
        raise ValueError(f"expected {len(contour)} curvature samples, got {kappa.shape}")
    t = contour.tangents()
    n = _oriented_normals(contour, phi)
    fu = bilinear_sample(F.u, contour.x, contour.y)
    fv = bilinear_sample(F.v, contour.x, contour.y)
    gs = bilinear_sample(g, contour.x, contour.y)
    tangential = np.abs(fu * t[:, 0] + fv * t[:, 1])
    normal = np.abs(gs * kappa + fu * n[:, 0] + fv * n[:, 1])
    return tangential, normal


def sample_curvature(contour: Contour, phi: np.ndarray) -> np.ndarray:
    """Level-set curvature of ``phi`` sampled bilinearly at the contour points."""
    return bilinear_sample(curvature(phi), contour.x, contour.y)


def classify_psp(contour: Contour, g, F: VectorField, kappa_on_contour, tol: float,
                 ratio: float = DEFAULT_PSP_RATIO, phi: np.ndarray | None = None) -> PSPReport:
    """Classify a contour as fully stationary, pseudo-stationary or moving.

    Pseudo-stationary means the normal residual sum is below ``tol`` while
    the tangential one is at least ``ratio * tol``. Residual sums do not
    depend on the point order.
    """
    if not tol > 0:
        raise ValueError("tol must be > 0")
    tan, nor = psp_residuals(contour, g, F, kappa_on_contour, phi)
    return PSPReport(float(tan.sum()), float(nor.sum()), float(tol), float(ratio), len(contour))


def classify_contours(contours: Sequence[Contour], g, F: VectorField, phi: np.ndarray, tol: float,
                      ratio: float = DEFAULT_PSP_RATIO) -> PSPReport:
    """``classify_psp`` over several closed contours of one level set, sums pooled."""
    if not tol > 0:
        raise ValueError("tol must be > 0")
    kappa = curvature(phi)
    tan_sum = nor_sum = 0.0
    count = 0
    for c in contours:
        ks = bilinear_sample(kappa, c.x, c.y)
        tan, nor = psp_residuals(c, g, F, ks, phi)
        tan_sum += float(tan.sum())
        nor_sum += float(nor.sum())
        count += len(c)
    return PSPReport(tan_sum, nor_sum, float(tol), float(ratio), count)


@dataclass(frozen=True)
class Residence:
    g_min: float
    g_max: float
    g_std: float


def level_set_residence(contour: Contour, g) -> Residence:
    """Spread of ``g`` along a contour; small spread means it follows a level line."""
    if not contour.closed:
        raise ValueError("level-set residence needs a closed contour")
    if len(contour) < 3:
        raise ValueError("level-set residence needs at least 3 points")
    vals = bilinear_sample(as_scalar_field(g, "g"), contour.x, contour.y)
    # centring on one sample keeps the spread of a constant exactly zero
    return Residence(float(vals.min()), float(vals.max()), float((vals - vals[0]).std()))


def dice_coefficient(a, b) -> float:
    """``2 |A & B| / (|A| + |B|)`` for boolean masks; two empty masks score 1."""
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise ValueError(f"mask shapes differ: {a.shape} vs {b.shape}")
    total = int(a.sum()) + int(b.sum())
    return 1.0 if total == 0 else 2.0 * int((a & b).sum()) / total


def geodesic_length(phi, g) -> float:
    """Weighted contour length ``sum g * delta_1(phi) * |grad phi|`` on the grid.

    Uses the compactly supported cosine delta, so only the band
    ``|phi| <= 1`` contributes. For a signed distance function this
    approximates the integral of ``g`` along the zero level set.
    """
    phi = as_scalar_field(phi, "phi")
    gy, gx = np.gradient(phi)
    return float(np.sum(as_scalar_field(g, "g") * dirac_approx(phi) * np.hypot(gx, gy)))
