import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import ndimage
from skimage.measure import euler_number

from geosnakes.levelset import init_from_shapes
from geosnakes.synth import (
    KINDS,
    LCG_INCREMENT,
    LCG_MULTIPLIER,
    SynthError,
    SyntheticSpec,
    generate,
    ground_truth_level_set,
    lcg_normal,
    lcg_uniform,
    mask_from_shapes,
    standard_initializations,
)

EIGHT = np.ones((3, 3), dtype=bool)


def components(mask):
    return ndimage.label(mask, EIGHT)


def near_boundary(mask, width=1):
    m = mask.astype(bool)
    return ndimage.binary_dilation(m, iterations=width) & ~ndimage.binary_erosion(m, iterations=width)


class TestScenes:
    def test_two_rectangles(self):
        img, mask = generate(SyntheticSpec("two_rectangles"))
        assert components(mask)[1] == 2
        far = ~near_boundary(mask)
        assert set(np.unique(img[far])) == {50.0, 200.0}
        hist, _ = np.histogram(img, bins=[0, 60, 190, 256])
        assert hist[1] < 0.1 * img.size and hist[0] > 0 and hist[2] > 0

    def test_ushape_one_concavity(self):
        _, mask = generate(SyntheticSpec("ushape"))
        m = mask.astype(bool)
        assert components(m)[1] == 1
        assert euler_number(m, connectivity=2) == 1
        # filling the bounding box leaves exactly one notch
        rows, cols = np.nonzero(m)
        box = np.zeros_like(m)
        box[rows.min():rows.max() + 1, cols.min():cols.max() + 1] = True
        notch, count = ndimage.label(box & ~m)
        assert count == 1
        assert notch[rows.min(), (cols.min() + cols.max()) // 2] == 1

    def test_ushape_dimensions(self):
        _, mask = generate(SyntheticSpec("ushape"))
        rows, cols = np.nonzero(mask)
        assert (rows.max() - rows.min() + 1, cols.max() - cols.min() + 1) == (48, 48)
        assert mask[40, 16:28].all() and not mask[40, 28:52].any() and mask[40, 52:64].all()

    def test_three_objects(self):
        _, mask = generate(SyntheticSpec("three_objects"))
        assert components(mask)[1] == 3

    @pytest.mark.parametrize("gap,expected", [(10.0, 9), (20.0, 9)])
    def test_arc_edge_components(self, gap, expected):
        """Bright-side pixels of strong edges split into one loop per arc."""
        spec = SyntheticSpec("three_circle_arcs", arc_gap_degrees=gap)
        img, _ = generate(spec)
        contrast = spec.foreground - spec.background
        morph_grad = ndimage.grey_dilation(img, size=3) - ndimage.grey_erosion(img, size=3)
        edges = (morph_grad >= contrast / 2) & (img >= (spec.foreground + spec.background) / 2)
        assert components(edges)[1] == expected

    def test_arc_mask_closes_discs(self):
        img, mask = generate(SyntheticSpec("three_circle_arcs"))
        assert components(mask)[1] == 3
        # the disc centres are background in the image but inside the mask
        for cx, cy in ((24, 25), (56, 25), (40, 55)):
            assert mask[cy, cx] == 1 and img[cy, cx] == 50.0

    @pytest.mark.parametrize("kind", KINDS)
    def test_threshold_matches_mask(self, kind):
        spec = SyntheticSpec(kind)
        img, mask = generate(spec)
        binary = img >= (spec.foreground + spec.background) / 2
        m = mask.astype(bool)
        if kind == "three_circle_arcs":
            # arcs lie inside the closed discs of the mask
            assert not (binary & ~m).any()
        else:
            assert not ((binary != m) & ~near_boundary(m)).any()

    def test_ground_truth_level_set(self):
        spec = SyntheticSpec("three_objects")
        _, mask = generate(spec)
        np.testing.assert_array_equal(ground_truth_level_set(spec) <= 0, mask.astype(bool))

    def test_inverted_contrast(self):
        img, mask = generate(SyntheticSpec("two_rectangles", foreground=20.0, background=220.0))
        assert img[mask.astype(bool) & ~near_boundary(mask)].max() == 20.0

    def test_scaled_canvas(self):
        _, small = generate(SyntheticSpec("two_rectangles"))
        _, big = generate(SyntheticSpec("two_rectangles", width=160, height=160))
        assert big.sum() == pytest.approx(4 * small.sum(), rel=0.01)


class TestRandom:
    def test_lcg_reference(self):
        state, expected = 42, []
        for _ in range(5):
            state = (state * LCG_MULTIPLIER + LCG_INCREMENT) % 2 ** 64
            expected.append((state >> 11) * 2.0 ** -53)
        np.testing.assert_array_equal(lcg_uniform(42, 5), expected)

    def test_uniform_range_and_mean(self):
        u = lcg_uniform(7, 20000)
        assert u.min() >= 0 and u.max() < 1
        assert abs(u.mean() - 0.5) < 0.01

    def test_normal_moments(self):
        z = lcg_normal(3, (100, 100))
        assert abs(z.mean()) < 0.03 and abs(z.std() - 1) < 0.03

    def test_noise_deterministic(self):
        spec = SyntheticSpec("ushape", noise_sigma=5.0, seed=11)
        a, _ = generate(spec)
        b, _ = generate(spec)
        c, _ = generate(SyntheticSpec("ushape", noise_sigma=5.0, seed=12))
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)

    @settings(max_examples=10, deadline=None)
    @given(st.sampled_from(KINDS), st.integers(0, 2 ** 63))
    def test_noise_free_ignores_seed(self, kind, seed):
        a, _ = generate(SyntheticSpec(kind, seed=seed))
        b, _ = generate(SyntheticSpec(kind))
        np.testing.assert_array_equal(a, b)


class TestInitializations:
    @pytest.mark.parametrize("kind", KINDS)
    def test_partial_overlap_each_object(self, kind):
        _, mask = generate(SyntheticSpec(kind))
        init = mask_from_shapes(standard_initializations(kind), 80, 80).astype(bool)
        labels, count = components(mask)
        for k in range(1, count + 1):
            obj = labels == k
            frac = (obj & init).sum() / obj.sum()
            assert 0 < frac < 1, (kind, k, frac)
        # and the circle is not contained in the objects either
        assert (init & ~mask.astype(bool)).any()

    def test_ushape_circle_crosses_arms(self):
        (c,) = standard_initializations("ushape")
        inside = init_from_shapes([c], 80, 80) < 0
        # arms occupy columns 16-27 and 52-63 above the base
        for cols in (slice(16, 28), slice(52, 64)):
            arm = np.zeros((80, 80), dtype=bool)
            arm[16:52, cols] = True
            assert (arm & inside).any() and (arm & ~inside).any()
        # the mouth and the slot interior start inside the contour
        assert inside[20, 40] and inside[40, 40]

    def test_scaled(self):
        (c,) = standard_initializations("ushape", 160, 160)
        assert (c.cx, c.cy, c.r) == (80, 80, 56)

    def test_unknown(self):
        with pytest.raises(SynthError):
            standard_initializations("blob")


class TestValidation:
    @pytest.mark.parametrize("kwargs", [
        {"kind": "blob"}, {"foreground": 50.0}, {"width": 20}, {"height": 31},
        {"noise_sigma": -1.0}, {"arc_gap_degrees": 130.0}])
    def test_rejects(self, kwargs):
        with pytest.raises(SynthError):
            generate(SyntheticSpec(**kwargs))
