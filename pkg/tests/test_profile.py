import numpy as np
import pytest

from potsim.errors import AmbiguousTopology, AxisCrossing, InvalidWindow
from potsim.profile import (
    Bitmap,
    ProfileCurve,
    detect_border,
    extract_profile,
    is_closed_chain,
    jitter_profile,
    load_bitmap,
    order_border,
    smooth_profile,
    to_axial_section,
)


def brute_force_border(pixels):
    """Literal per-pixel evaluation of the border formula."""
    h, w = pixels.shape
    out = set()
    for i in range(h):
        for j in range(w):
            up = abs(int(pixels[i, j]) - int(pixels[i - 1, j])) if i > 0 else 0
            left = abs(int(pixels[i, j]) - int(pixels[i, j - 1])) if j > 0 else 0
            if up + left > 0:
                out.add((i, j))
    return out


class TestBitmap:
    def test_rejects_non_binary(self):
        with pytest.raises(ValueError):
            Bitmap(np.full((4, 4), 2, dtype=np.uint8))

    def test_rejects_tiny(self):
        with pytest.raises(ValueError):
            Bitmap(np.zeros((1, 5), dtype=np.uint8))


class TestDetectBorder:
    def test_all_white_is_empty(self):
        assert detect_border(Bitmap(np.zeros((10, 10), dtype=np.uint8))) == set()

    def test_all_black_is_empty(self):
        # no transitions anywhere, the boundary convention treats
        # out-of-bounds neighbours as equal
        assert detect_border(Bitmap(np.ones((6, 6), dtype=np.uint8))) == set()

    def test_single_interior_black_pixel(self):
        px = np.zeros((8, 8), dtype=np.uint8)
        px[3, 4] = 1
        assert detect_border(Bitmap(px)) == {(3, 4), (4, 4), (3, 5)}

    def test_black_pixel_at_origin(self):
        # (0, 0) itself has no in-bounds up/left neighbour, so only the
        # two pixels that see the transition are border
        px = np.zeros((5, 5), dtype=np.uint8)
        px[0, 0] = 1
        assert detect_border(Bitmap(px)) == {(1, 0), (0, 1)}

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            px = (rng.uniform(size=(32, 32)) < 0.4).astype(np.uint8)
            assert detect_border(Bitmap(px)) == brute_force_border(px)


class TestOrderBorder:
    def test_filled_square_is_a_ring(self):
        px = np.zeros((9, 9), dtype=np.uint8)
        px[2:7, 2:7] = 1
        border = detect_border(Bitmap(px))
        chain = order_border(border)
        assert sorted(chain) == sorted(border)
        assert len(set(chain)) == len(chain)
        for a, b in zip(chain, chain[1:]):
            assert max(abs(a[0] - b[0]), abs(a[1] - b[1])) <= 1
        assert is_closed_chain(chain)

    def test_two_components_rejected(self):
        border = {(0, 0), (0, 1), (5, 5), (5, 6)}
        with pytest.raises(AmbiguousTopology):
            order_border(border)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            order_border(set())

    def test_random_blob_neighbour_property(self):
        # simply-connected blob: border ordering should chain 8-adjacent
        # pixels and visit each exactly once
        rng = np.random.default_rng(11)
        for _ in range(20):
            px = np.zeros((20, 20), dtype=np.uint8)
            ci, cj = rng.integers(6, 14, size=2)
            ri, rj = rng.integers(3, 6, size=2)
            ii, jj = np.ogrid[:20, :20]
            px[((ii - ci) / ri) ** 2 + ((jj - cj) / rj) ** 2 <= 1.0] = 1
            border = detect_border(Bitmap(px))
            try:
                chain = order_border(border)
            except AmbiguousTopology:
                continue  # a genuine junction; the error is the contract
            assert sorted(chain) == sorted(border)
            for a, b in zip(chain, chain[1:]):
                assert max(abs(a[0] - b[0]), abs(a[1] - b[1])) <= 1

    def test_starts_topmost_leftmost(self):
        px = np.zeros((9, 9), dtype=np.uint8)
        px[2:5, 3:8] = 1
        chain = order_border(detect_border(Bitmap(px)))
        assert chain[0] == min(chain)


class TestSmoothProfile:
    def test_window_one_is_identity(self):
        curve = ProfileCurve(np.array([[1.0, 0.0], [2.0, 1.0], [1.5, 2.0]]))
        out = smooth_profile(curve, 1)
        np.testing.assert_array_equal(out.points, curve.points)

    def test_collinear_points_preserved(self):
        curve = ProfileCurve(np.array([[1.0, 0.0], [2.0, 1.0], [3.0, 2.0]]))
        out = smooth_profile(curve, 3)
        # interior point is the average of three collinear points = itself
        np.testing.assert_allclose(out.points[1], curve.points[1], atol=1e-12)

    def test_open_curve_matches_oracle(self):
        rng = np.random.default_rng(3)
        pts = rng.uniform(0.1, 5.0, size=(17, 2))
        curve = ProfileCurve(pts)
        out = smooth_profile(curve, 5)
        for k in range(17):
            lo, hi = max(0, k - 2), min(17, k + 3)
            np.testing.assert_allclose(out.points[k], pts[lo:hi].mean(axis=0), atol=1e-12)

    def test_closed_curve_wraps(self):
        rng = np.random.default_rng(4)
        pts = rng.uniform(0.1, 5.0, size=(10, 2))
        out = smooth_profile(ProfileCurve(pts, closed=True), 3)
        for k in range(10):
            expect = (pts[(k - 1) % 10] + pts[k] + pts[(k + 1) % 10]) / 3.0
            np.testing.assert_allclose(out.points[k], expect, atol=1e-12)

    def test_even_window_rejected(self):
        curve = ProfileCurve(np.array([[1.0, 0.0], [2.0, 1.0], [1.5, 2.0]]))
        with pytest.raises(InvalidWindow):
            smooth_profile(curve, 2)
        with pytest.raises(InvalidWindow):
            smooth_profile(curve, 0)

    def test_window_larger_than_curve_rejected(self):
        curve = ProfileCurve(np.array([[1.0, 0.0], [2.0, 1.0], [1.5, 2.0]]))
        with pytest.raises(InvalidWindow):
            smooth_profile(curve, 5)

    def test_point_count_preserved(self):
        rng = np.random.default_rng(5)
        pts = rng.uniform(0.1, 5.0, size=(23, 2))
        assert len(smooth_profile(ProfileCurve(pts), 7).points) == 23


class TestJitterProfile:
    def test_sigma_zero_is_identity(self):
        curve = ProfileCurve(np.array([[1.0, 0.0], [2.0, 1.0], [1.5, 2.0]]))
        np.testing.assert_array_equal(jitter_profile(curve, 0.0, 1).points, curve.points)

    def test_deterministic_per_seed(self):
        curve = ProfileCurve(np.random.default_rng(0).uniform(1, 2, size=(30, 2)))
        a = jitter_profile(curve, 0.1, 99)
        b = jitter_profile(curve, 0.1, 99)
        np.testing.assert_array_equal(a.points, b.points)
        c = jitter_profile(curve, 0.1, 100)
        assert not np.array_equal(a.points, c.points)

    def test_mean_offset_near_zero(self):
        sigma = 0.5
        pts = np.full((10_000, 2), 50.0)
        out = jitter_profile(ProfileCurve(pts), sigma, 42)
        offsets = out.points - pts
        assert abs(offsets[:, 0].mean()) < 3 * sigma / 100
        assert abs(offsets[:, 1].mean()) < 3 * sigma / 100

    def test_radius_clamped_nonnegative(self):
        pts = np.zeros((1000, 2))
        out = jitter_profile(ProfileCurve(pts), 1.0, 7)
        assert (out.points[:, 0] >= 0).all()


class TestToAxialSection:
    def test_axis_point(self):
        curve = to_axial_section([(0, 4)], scale=1.0, axis_column=4, height_px=12)
        np.testing.assert_allclose(curve.points, [[0.0, 12.0]])

    def test_vertical_column_constant_radius(self):
        pixels = [(i, 14) for i in range(10)]
        curve = to_axial_section(pixels, scale=0.5, axis_column=4, height_px=10)
        np.testing.assert_allclose(curve.radii, 5.0)

    def test_formula_oracle(self):
        rng = np.random.default_rng(8)
        pixels = [(int(i), int(j)) for i, j in rng.integers(0, 40, size=(50, 2))]
        scale, axis, hpx = 0.25, -3, 40
        curve = to_axial_section(pixels, scale, axis, hpx)
        for (i, j), (r, h) in zip(pixels, curve.points):
            assert r == (j - axis) * scale
            assert h == (hpx - i) * scale

    def test_axis_crossing(self):
        with pytest.raises(AxisCrossing):
            to_axial_section([(0, 2)], scale=1.0, axis_column=5, height_px=10)

    def test_preserves_count_and_order(self):
        pixels = [(0, 5), (1, 6), (2, 7)]
        curve = to_axial_section(pixels, 1.0, 5, 10)
        assert len(curve.points) == 3
        np.testing.assert_allclose(curve.radii, [0.0, 1.0, 2.0])


class TestBitmapIO:
    def test_pbm_round_trip(self, tmp_path):
        path = tmp_path / "t.pbm"
        path.write_text("P1\n# comment\n4 3\n0 1 0 0\n1 1 0 0\n0 0 0 1\n")
        bmp = load_bitmap(path)
        assert bmp.width == 4 and bmp.height == 3
        assert bmp.pixels[0, 1] == 1 and bmp.pixels[2, 3] == 1

    def test_png(self, tmp_path):
        from PIL import Image

        arr = np.full((6, 6), 255, dtype=np.uint8)
        arr[2:4, 2:4] = 0  # black square = ink
        path = tmp_path / "t.png"
        Image.fromarray(arr).save(path)
        bmp = load_bitmap(path)
        assert bmp.pixels.sum() == 4
        assert bmp.pixels[2, 2] == 1

    def test_bad_pbm(self, tmp_path):
        path = tmp_path / "bad.pbm"
        path.write_text("P4\n2 2\n0 0 0 0\n")
        with pytest.raises(ValueError):
            load_bitmap(path)


class TestExtractProfile:
    def test_end_to_end_square(self):
        px = np.zeros((12, 12), dtype=np.uint8)
        px[3:9, 4:8] = 1
        curve = extract_profile(Bitmap(px), scale=2.0)
        assert (curve.radii >= 0).all()
        assert len(curve.points) == len(detect_border(Bitmap(px)))

    def test_blank_bitmap_rejected(self):
        with pytest.raises(ValueError):
            extract_profile(Bitmap(np.zeros((5, 5), dtype=np.uint8)), scale=1.0)
