import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from degraf_flow.core import (
    SummedAreaTable,
    as_gray,
    build_pyramid,
    gradient,
    pyramid_shapes,
    rgb_to_gray,
    summed_area,
)

from oracles import binomial_filter_loops, gradient_loops, window_sum_loops


class TestAsGray:
    def test_converts_to_float64(self):
        out = as_gray(np.zeros((2, 3), dtype=np.uint8))
        assert out.dtype == np.float64 and out.shape == (2, 3)

    @pytest.mark.parametrize(
        "bad",
        [np.zeros(5), np.zeros((0, 3)), np.full((2, 2), np.nan), np.full((2, 2), 256.0), np.full((2, 2), -1.0)],
    )
    def test_rejects_invalid(self, bad):
        with pytest.raises(ValueError):
            as_gray(bad)

    def test_luma(self):
        rgb = np.array([[[255, 0, 0], [0, 255, 0], [0, 0, 255]]], dtype=float)
        np.testing.assert_allclose(rgb_to_gray(rgb), [[0.299 * 255, 0.587 * 255, 0.114 * 255]])


class TestPyramid:
    def test_single_level_is_identity(self, rng):
        img = rng.uniform(0, 255, (100, 100))
        pyr = build_pyramid(img, 1, 0.5)
        assert len(pyr) == 1
        np.testing.assert_array_equal(pyr[0], img)

    def test_level_dims(self, rng):
        pyr = build_pyramid(rng.uniform(0, 255, (100, 100)), 3, 0.5)
        assert [lvl.shape for lvl in pyr.levels] == [(100, 100), (50, 50), (25, 25)]

    def test_constant_stays_constant(self):
        pyr = build_pyramid(np.full((100, 100), 77.0), 3, 0.5)
        for lvl in pyr.levels:
            np.testing.assert_allclose(lvl, 77.0, atol=1e-6)

    def test_level_matches_filter_then_subsample_oracle(self, rng):
        img = rng.uniform(0, 255, (20, 18))
        pyr = build_pyramid(img, 2, 0.5)
        expected = binomial_filter_loops(img)[::2, ::2]
        np.testing.assert_allclose(pyr[1], expected, rtol=0, atol=1e-10)

    @pytest.mark.parametrize("shape,levels,scale", [((100, 60), 4, 0.5), ((375, 1242), 4, 0.5), ((90, 90), 3, 0.7)])
    def test_floor_recurrence(self, shape, levels, scale):
        pyr = build_pyramid(np.zeros(shape), levels, scale)
        dims = [shape]
        for _ in range(levels - 1):
            dims.append((int(np.floor(dims[-1][0] * scale)), int(np.floor(dims[-1][1] * scale))))
        assert [lvl.shape for lvl in pyr.levels] == dims == pyramid_shapes(shape, levels, scale)

    @pytest.mark.parametrize("levels,scale", [(0, 0.5), (2, 0.0), (2, 1.0), (5, 0.5)])
    def test_rejects_bad_parameters(self, levels, scale):
        # 5 levels of a 40x40 image at 0.5 would end at 2x2
        with pytest.raises(ValueError):
            build_pyramid(np.zeros((40, 40)), levels, scale)


class TestGradient:
    def test_constant_is_zero(self):
        gx, gy = gradient(np.full((7, 9), 42.0))
        assert not gx.any() and not gy.any()

    def test_linear_ramp(self):
        img = np.tile(2.0 * np.arange(10), (6, 1))
        gx, gy = gradient(img)
        np.testing.assert_array_equal(gx[:, 1:-1], 2.0)
        np.testing.assert_array_equal(gy, 0.0)

    def test_matches_loop_oracle(self, rng):
        img = rng.uniform(0, 255, (8, 8))
        gx, gy = gradient(img)
        ox, oy = gradient_loops(img)
        np.testing.assert_array_equal(gx, ox)
        np.testing.assert_array_equal(gy, oy)

    def test_rejects_small(self):
        with pytest.raises(ValueError):
            gradient(np.zeros((2, 5)))


class TestSummedArea:
    def test_all_ones(self):
        sat = summed_area(np.ones((4, 4)))
        assert sat.window_sum(0, 0, 4, 4) == 16

    def test_single_pixel(self, rng):
        img = rng.uniform(0, 255, (5, 6))
        sat = summed_area(img)
        assert sat.window_sum(3, 2, 1, 1) == pytest.approx(img[3, 2], rel=1e-12)

    def test_random_windows_match_loops(self, rng):
        img = rng.uniform(0, 255, (32, 32))
        sat = SummedAreaTable(img)
        for _ in range(100):
            h, w = rng.integers(1, 33, size=2)
            y0 = rng.integers(0, 32 - h + 1)
            x0 = rng.integers(0, 32 - w + 1)
            expected = window_sum_loops(img, y0, x0, h, w)
            assert sat.window_sum(y0, x0, h, w) == pytest.approx(expected, rel=1e-12, abs=1e-9)

    def test_weighted_tables(self, rng):
        img = rng.uniform(0, 255, (12, 15))
        sat = SummedAreaTable(img)
        rows, cols = np.mgrid[0:12, 0:15]
        y0, x0, h, w = 2, 3, 5, 7
        win = (slice(y0, y0 + h), slice(x0, x0 + w))
        assert sat.col_weighted_sum(y0, x0, h, w) == pytest.approx((cols * img)[win].sum(), rel=1e-12)
        assert sat.row_weighted_sum(y0, x0, h, w) == pytest.approx((rows * img)[win].sum(), rel=1e-12)

    def test_vectorized_query(self, rng):
        img = rng.uniform(0, 255, (10, 10))
        sat = SummedAreaTable(img)
        ys, xs = np.array([0, 3, 7]), np.array([1, 5, 6])
        got = sat.window_sum(ys, xs, 3, 4)
        assert got.shape == (3,)
        for g, y, x in zip(got, ys, xs):
            assert g == pytest.approx(img[y:y + 3, x:x + 4].sum(), rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    y0=st.integers(0, 31),
    x0=st.integers(0, 31),
    h=st.integers(1, 32),
    w=st.integers(1, 32),
)
def test_summed_area_property(seed, y0, x0, h, w):
    img = np.random.default_rng(seed).uniform(0, 255, (32, 32))
    h = min(h, 32 - y0)
    w = min(w, 32 - x0)
    expected = window_sum_loops(img, y0, x0, h, w)
    assert summed_area(img).window_sum(y0, x0, h, w) == pytest.approx(expected, rel=1e-12, abs=1e-9)
