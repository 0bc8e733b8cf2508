import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from geosnakes.diagnostics import (
    DEGENERATE,
    EXTREMUM,
    SADDLE,
    PSPReport,
    classify_contours,
    classify_psp,
    dice_coefficient,
    find_critical_points,
    geodesic_length,
    level_set_residence,
    read_critical_points,
    sample_curvature,
    write_critical_points,
)
from geosnakes.fields import VectorField, bilinear_sample
from geosnakes.levelset import Contour, extract_contour
from geosnakes.synth import RECT_LEFT, RECT_RIGHT

N = 41


def grid(n=N):
    y, x = np.mgrid[0:n, 0:n].astype(float)
    return x, y


def brute_force_critical(g, tol):
    """Pixel scan: small gradient, local minimum of |grad g| in the 8-neighbourhood."""
    gy, gx = np.gradient(g)
    gxy, gxx = np.gradient(gx)
    gyy, _ = np.gradient(gy)
    norm = np.hypot(gx, gy)
    out = []
    for r in range(2, g.shape[0] - 2):
        for c in range(2, g.shape[1] - 2):
            if norm[r, c] < tol and norm[r, c] <= norm[r - 1:r + 2, c - 1:c + 2].min():
                out.append((c, r, gxx[r, c] * gyy[r, c] - gxy[r, c] ** 2))
    return out


class TestCriticalPoints:
    def test_bowl(self):
        x, y = grid()
        pts = find_critical_points((x - 20.3) ** 2 + (y - 19.6) ** 2)
        assert len(pts) == 1
        p = pts[0]
        assert p.kind == EXTREMUM and p.hessian_det > 0
        assert (p.x, p.y) == pytest.approx((20.3, 19.6), abs=0.3)

    def test_saddle(self):
        x, y = grid()
        pts = find_critical_points((x - 20) ** 2 - (y - 20) ** 2)
        assert [p.kind for p in pts] == [SADDLE]
        assert (pts[0].x, pts[0].y) == pytest.approx((20, 20), abs=1e-9)
        assert pts[0].hessian_det < 0

    def test_constant_none(self):
        assert find_critical_points(np.full((20, 20), 0.7)) == []

    def test_plane_none(self):
        x, y = grid()
        assert find_critical_points(0.3 * x - 0.1 * y) == []

    def test_saddle_between_bumps(self):
        # two Gaussian wells: minima in the wells, a saddle between them
        x, y = grid(61)
        g = 1 - np.exp(-((x - 20) ** 2 + (y - 30) ** 2) / 40) - np.exp(-((x - 40) ** 2 + (y - 30) ** 2) / 40)
        pts = find_critical_points(g)
        saddles = [p for p in pts if p.kind == SADDLE]
        wells = [p for p in pts if p.kind == EXTREMUM]
        assert len(saddles) == 1 and (saddles[0].x, saddles[0].y) == pytest.approx((30, 30), abs=0.5)
        assert sorted(round(p.x) for p in wells) == [20, 40]

    def test_matches_brute_force_on_smooth_field(self):
        x, y = grid(48)
        g = np.sin(x / 5.0) * np.cos(y / 6.0)
        tol = 0.02 * float(np.hypot(*np.gradient(g)).max())
        ours = find_critical_points(g)
        oracle = brute_force_critical(g, tol)
        # every oracle pixel has a reported point within a pixel, with the same kind
        for cx, cy, det in oracle:
            near = [p for p in ours if np.hypot(p.x - cx, p.y - cy) <= 1.0]
            assert near, (cx, cy)
            assert near[0].kind == (SADDLE if det < 0 else EXTREMUM)

    def test_kind_matches_det_sign(self):
        x, y = grid(48)
        g = np.sin(x / 4.0) * np.sin(y / 5.0)
        for p in find_critical_points(g):
            if p.kind == SADDLE:
                assert p.hessian_det < 0
            elif p.kind == EXTREMUM:
                assert p.hessian_det > 0

    def test_gradient_below_threshold(self):
        x, y = grid(48)
        g = np.cos(x / 4.0) + np.cos(y / 7.0)
        tol = 0.02 * float(np.hypot(*np.gradient(g)).max())
        pts = find_critical_points(g, tol)
        assert pts and all(p.gradient_norm < tol for p in pts)

    def test_dedup(self):
        x, y = grid(48)
        pts = find_critical_points(np.sin(x / 3.0) * np.sin(y / 3.0))
        for i, p in enumerate(pts):
            for q in pts[i + 1:]:
                assert np.hypot(p.x - q.x, p.y - q.y) >= 2.0

    def test_two_rectangles_midline_saddle(self, scenes):
        _, _, edge = scenes("two_rectangles")
        saddles = [p for p in find_critical_points(edge.g) if p.kind == SADDLE]
        gap_left, gap_right = RECT_LEFT[2] - 0.5, RECT_RIGHT[0] - 0.5
        mid = [p for p in saddles if abs(p.x - 0.5 * (gap_left + gap_right)) <= 1.0
               and RECT_RIGHT[1] <= p.y <= RECT_LEFT[3]]
        assert mid

    @settings(max_examples=15, deadline=None)
    @given(st.floats(0.1, 20), st.floats(-5, 5))
    def test_affine_invariance(self, a, b):
        x, y = grid(48)
        g = np.sin(x / 5.0) * np.cos(y / 6.0) + 0.01 * x
        base = find_critical_points(g)
        other = find_critical_points(a * g + b)
        assert len(base) == len(other)
        for p, q in zip(base, other):
            assert p.kind == q.kind
            assert np.hypot(p.x - q.x, p.y - q.y) <= 0.5

    def test_csv_round_trip(self, tmp_path):
        x, y = grid()
        pts = find_critical_points((x - 20) ** 2 - (y - 20) ** 2 + 0.5 * x)
        write_critical_points(tmp_path / "cp.csv", pts)
        assert (tmp_path / "cp.csv").read_text().splitlines()[0] == "x,y,kind,grad_norm,hess_det"
        assert read_critical_points(tmp_path / "cp.csv") == pts

    def test_empty_csv(self, tmp_path):
        write_critical_points(tmp_path / "cp.csv", [])
        assert read_critical_points(tmp_path / "cp.csv") == []

    def test_degenerate_label_exists(self):
        assert DEGENERATE not in (SADDLE, EXTREMUM)


def circle_contour(cx=32.0, cy=32.0, r=12.0, n=120):
    t = np.linspace(0, 2 * np.pi, n, endpoint=False)
    # counter-clockwise on screen (y down) is the orientation used for outer boundaries
    return Contour(np.column_stack([cx + r * np.cos(t), cy - r * np.sin(t)]), closed=True)


def radial_field(n=64, c=32.0, scale=1.0):
    x, y = grid(n)
    r = np.maximum(np.hypot(x - c, y - c), 1e-9)
    return VectorField(-scale * (x - c) / r, -scale * (y - c) / r)


class TestPSP:
    def test_radial_circle_not_psp(self):
        F = radial_field(scale=0.5)
        c = circle_contour()
        rep = classify_psp(c, np.full((64, 64), 0.5), F, np.full(len(c), 1 / 12), tol=1.0)
        assert rep.tangential_residual < 0.02
        assert not rep.is_stationary_normal_only
        assert rep.label != "PSP"

    def test_zero_force_straight_contour(self):
        pts = np.array([[10.0, 10], [30, 10], [30, 11], [10, 11]])
        c = Contour(pts, closed=True)
        rep = classify_psp(c, np.ones((40, 40)), VectorField.zeros((40, 40)), np.zeros(4), tol=1e-6)
        assert rep.tangential_residual == 0 and rep.normal_residual == 0
        assert rep.is_stationary_full and rep.label == "stationary"

    def test_mouth_chord_is_psp(self, scenes):
        """A straight chord across the U mouth: F along the chord, nearly no normal part."""
        _, _, edge = scenes("ushape")
        g, F = edge.g, edge.F
        y0 = 22.0
        xs = np.arange(30.0, 50.01, 1.0)
        fu = bilinear_sample(F.u, xs, np.full_like(xs, y0))
        fv = bilinear_sample(F.v, xs, np.full_like(xs, y0))
        # the forces point horizontally in opposite directions across the mouth
        assert fu[0] < 0 < fu[-1] or fu[0] > 0 > fu[-1]
        # a thin closed loop whose long sides run along the chord
        top = np.column_stack([xs, np.full_like(xs, y0)])
        loop = Contour(np.vstack([top, top[::-1] + [0, 1e-3]]), closed=True)
        nor = np.abs(fv)
        tol = 1.5 * 2 * nor.sum()
        kappa = np.zeros(len(loop))
        rep = classify_psp(loop, g, F, kappa, tol=tol, ratio=10.0)
        assert rep.tangential_residual >= 10 * tol
        assert rep.is_stationary_normal_only and rep.label == "PSP"

    def test_reversal_invariance(self):
        rng = np.random.default_rng(5)
        F = VectorField(rng.normal(size=(64, 64)), rng.normal(size=(64, 64)))
        g = rng.random((64, 64))
        c = circle_contour(r=10, n=90)
        k = rng.normal(size=len(c))
        a = classify_psp(c, g, F, k, tol=1.0)
        b = classify_psp(c.reversed(), g, F, k[::-1], tol=1.0)
        assert a.tangential_residual == pytest.approx(b.tangential_residual, abs=1e-9)
        assert a.normal_residual == pytest.approx(b.normal_residual, abs=1e-9)

    def test_reversal_invariance_with_phi(self):
        x, y = grid(64)
        phi = np.hypot(x - 30, y - 33) - 11
        (c,) = extract_contour(phi)
        F = radial_field(scale=0.3)
        g = 0.2 + 0.01 * x
        k = sample_curvature(c, phi)
        a = classify_contours([c], g, F, phi, tol=1.0)
        b = classify_contours([c.reversed()], g, F, phi, tol=1.0)
        assert a.normal_residual == pytest.approx(b.normal_residual, abs=1e-9)
        assert a.tangential_residual == pytest.approx(b.tangential_residual, abs=1e-9)
        direct = classify_psp(c, g, F, k, tol=1.0, phi=phi)
        assert direct.normal_residual == pytest.approx(a.normal_residual, abs=1e-9)

    def test_open_contour_rejected(self):
        c = Contour(np.array([[1.0, 1], [5, 1], [9, 2]]), closed=False)
        with pytest.raises(ValueError):
            classify_psp(c, np.ones((12, 12)), VectorField.zeros((12, 12)), np.zeros(3), tol=1.0)

    def test_bad_tol(self):
        with pytest.raises(ValueError):
            classify_psp(circle_contour(), np.ones((64, 64)), radial_field(), np.zeros(120), tol=0.0)

    def test_curvature_length_mismatch(self):
        with pytest.raises(ValueError):
            classify_psp(circle_contour(), np.ones((64, 64)), radial_field(), np.zeros(7), tol=1.0)

    @pytest.mark.parametrize("tan,nor,label", [
        (5.0, 0.1, "PSP"), (0.1, 0.2, "stationary"), (5.0, 3.0, "moving"), (0.5, 0.1, "moving")])
    def test_labels(self, tan, nor, label):
        assert PSPReport(tan, nor, tol=0.25, ratio=10.0, points=10).label == label

    def test_text_block(self):
        text = PSPReport(1.5, 0.25, 0.5, 10.0, 7).to_text()
        lines = dict(line.split("=", 1) for line in text.splitlines())
        assert lines["tangential_residual"] == "1.5" and lines["label"] == "moving"
        assert lines["is_stationary_full"] == "False" and lines["points"] == "7"


class TestResidence:
    def radial_g(self):
        x, y = grid(64)
        return 1 - 0.8 * np.exp(-((x - 32) ** 2 + (y - 32) ** 2) / 200)

    def test_circle_on_level_set(self):
        assert level_set_residence(circle_contour(r=12, n=200), self.radial_g()).g_std < 1e-3

    def test_ellipse_across_levels(self):
        g = self.radial_g()
        t = np.linspace(0, 2 * np.pi, 200, endpoint=False)
        ell = Contour(np.column_stack([32 + 20 * np.cos(t), 32 + 6 * np.sin(t)]), closed=True)
        circ = level_set_residence(circle_contour(r=12, n=200), g).g_std
        assert level_set_residence(ell, g).g_std > 10 * max(circ, 1e-6)

    def test_constant(self):
        r = level_set_residence(circle_contour(), np.full((64, 64), 0.3))
        assert r.g_std == 0 and r.g_min == r.g_max == 0.3

    def test_rejects(self):
        with pytest.raises(ValueError):
            level_set_residence(Contour(np.array([[1.0, 1], [2, 2]]), closed=True), np.ones((5, 5)))
        with pytest.raises(ValueError):
            level_set_residence(Contour(np.array([[1.0, 1], [2, 2], [3, 1]]), closed=False), np.ones((5, 5)))


class TestMetrics:
    def test_dice(self):
        a = np.zeros((10, 10), bool)
        b = np.zeros((10, 10), bool)
        a[2:6, 2:6] = True
        b[4:8, 2:6] = True
        assert dice_coefficient(a, b) == pytest.approx(2 * 8 / 32)
        assert dice_coefficient(a, a) == 1.0
        assert dice_coefficient(b & ~b, a & ~a) == 1.0
        with pytest.raises(ValueError):
            dice_coefficient(a, b[:5])

    def test_geodesic_length_of_circle(self):
        x, y = grid(96)
        phi = np.hypot(x - 48, y - 48) - 20
        assert geodesic_length(phi, np.ones_like(phi)) == pytest.approx(2 * np.pi * 20, rel=0.02)
        assert geodesic_length(phi, np.full(phi.shape, 0.25)) == pytest.approx(0.5 * np.pi * 20, rel=0.02)


@pytest.mark.slow
class TestPaperSynthetics:
    """Edge-only runs stall in pseudo-stationary states; alternation removes the tangential residual."""

    @pytest.mark.parametrize("kind", ["two_rectangles", "three_objects", "three_circle_arcs"])
    def test_gac_psp_alt_stationary(self, runs, kind):
        from geosnakes.cli import PSP_TOL_FRACTION

        labels = {}
        for method in ("gac", "geosnakes_alt"):
            res = runs(kind, method)
            tol = PSP_TOL_FRACTION * res.trace.column("normal_sum").max()
            rep = classify_contours([c for c in res.contours if c.closed], res.edge.g, res.edge.F, res.phi, tol)
            labels[method] = rep
        assert labels["gac"].is_stationary_normal_only
        assert labels["geosnakes_alt"].is_stationary_full
