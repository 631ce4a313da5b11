import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from trojscan.errors import InvalidParameterError
from trojscan.imaging import (
    Color,
    TriggerSpec,
    default_size_grid,
    embed_trigger,
    from_uint8,
    generate_candidates,
    load_png,
    make_square_mask,
    quadrant_centers,
    resize_bilinear,
    sample_color,
    save_png,
    square_side,
    to_uint8,
)


def brute_force_ones(mask):
    return sum(int(mask[i, j]) for i in range(mask.shape[0]) for j in range(mask.shape[1]))


class TestSquareMask:
    def test_side_formula_224(self):
        # sqrt(0.04 * 50176) = 44.8 -> 45
        assert square_side(0.04, (224, 224)) == 45
        mask = make_square_mask((112, 112), 0.04, (224, 224))
        assert brute_force_ones(mask) == 45 * 45 == 2025

    def test_single_pixel(self):
        mask = make_square_mask((112, 112), 1 / 50176, (224, 224))
        assert mask.sum() == 1

    def test_clamped_at_border_keeps_area(self):
        mask = make_square_mask((5, 5), 0.04, (224, 224))
        assert mask.sum() == 45 * 45
        rows, cols = np.nonzero(mask)
        assert rows.min() >= 0 and cols.min() >= 0
        assert rows.max() < 224 and cols.max() < 224
        assert rows.min() == 0 and cols.min() == 0  # pushed against the corner

    @pytest.mark.parametrize("bad", [0.0, -0.1, 1.0, 1.5])
    def test_bad_area_fraction(self, bad):
        with pytest.raises(InvalidParameterError):
            make_square_mask((10, 10), bad, (64, 64))

    def test_center_outside(self):
        with pytest.raises(InvalidParameterError):
            make_square_mask((64, 10), 0.1, (64, 64))

    @given(
        f=st.floats(min_value=0.001, max_value=0.25),
        h=st.integers(min_value=8, max_value=96),
        w=st.integers(min_value=8, max_value=96),
        data=st.data(),
    )
    @settings(max_examples=60, deadline=None)
    def test_mask_properties(self, f, h, w, data):
        # the area band only holds when the square is not capped by an
        # extreme aspect ratio
        assume(math.sqrt(f * h * w) + 0.5 <= min(h, w))
        row = data.draw(st.integers(min_value=0, max_value=h - 1))
        col = data.draw(st.integers(min_value=0, max_value=w - 1))
        mask = make_square_mask((row, col), f, (h, w))
        side = square_side(f, (h, w))
        assert set(np.unique(mask)) <= {0, 1}
        assert mask.sum() == side * side
        assert abs(side * side - f * h * w) <= 2 * side + 1
        rows, cols = np.nonzero(mask)
        assert rows.max() - rows.min() == side - 1
        assert cols.max() - cols.min() == side - 1


class TestEmbed:
    def test_zero_mask_is_identity(self):
        rng = np.random.default_rng(0)
        img = rng.uniform(0, 1, (16, 16, 3))
        out = embed_trigger(img, np.zeros((16, 16), dtype=np.uint8), Color(255, 0, 0))
        assert np.array_equal(out, img)
        assert out is not img

    def test_theta_zero_substitutes_color(self):
        img = np.full((4, 4, 3), 0.5)
        mask = np.zeros((4, 4), dtype=np.uint8)
        mask[1, 2] = 1
        out = embed_trigger(img, mask, Color(255, 0, 0), theta=0.0)
        assert tuple(out[1, 2]) == (1.0, 0.0, 0.0)
        assert tuple(out[0, 0]) == (0.5, 0.5, 0.5)

    def test_blend(self):
        img = np.full((2, 2, 3), 0.8)
        mask = np.ones((2, 2), dtype=np.uint8)
        out = embed_trigger(img, mask, Color(0, 0, 0), theta=0.5)
        assert np.allclose(out, 0.4, atol=1e-15)

    def test_input_not_mutated(self):
        img = np.full((4, 4, 3), 0.25)
        before = img.copy()
        embed_trigger(img, np.ones((4, 4), dtype=np.uint8), Color(9, 9, 9), theta=0.3)
        assert np.array_equal(img, before)

    def test_idempotent_at_theta_zero(self):
        rng = np.random.default_rng(1)
        img = rng.uniform(0, 1, (12, 12, 3))
        mask = make_square_mask((6, 6), 0.1, (12, 12))
        once = embed_trigger(img, mask, Color(10, 20, 30))
        twice = embed_trigger(once, mask, Color(10, 20, 30))
        assert np.array_equal(once, twice)

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidParameterError):
            embed_trigger(np.zeros((4, 4, 3)), np.zeros((5, 5), dtype=np.uint8), Color(0, 0, 0))

    @given(
        theta=st.floats(min_value=0.0, max_value=1.0),
        seed=st.integers(min_value=0, max_value=2**31),
    )
    @settings(max_examples=40, deadline=None)
    def test_range_and_untouched(self, theta, seed):
        rng = np.random.default_rng(seed)
        img = rng.uniform(0, 1, (10, 10, 3))
        mask = make_square_mask(
            (int(rng.integers(0, 10)), int(rng.integers(0, 10))), 0.15, (10, 10)
        )
        color = sample_color(rng)
        out = embed_trigger(img, mask, color, theta)
        assert out.min() >= 0.0 and out.max() <= 1.0
        outside = mask == 0
        assert np.array_equal(out[outside], img[outside])


class TestCandidates:
    def test_default_grid_is_48(self):
        grid = default_size_grid()
        assert len(grid) == 12
        assert grid[0] == 0.02 and grid[-1] == 0.24
        cands = generate_candidates((224, 224), grid, quadrant_centers((224, 224)), Color(0, 0, 0))
        assert len(cands) == 48

    def test_quadrant_centers_224(self):
        assert quadrant_centers((224, 224)) == [(56, 56), (56, 168), (168, 56), (168, 168)]

    def test_single(self):
        cands = generate_candidates((64, 64), [0.1], [(5, 5)], Color(1, 2, 3))
        assert len(cands) == 1
        assert cands[0] == TriggerSpec(center=(5, 5), area_fraction=0.1, color=Color(1, 2, 3))
        assert cands[0].blend_theta == 0.0

    def test_order_locations_outer(self):
        cands = generate_candidates((64, 64), [0.1, 0.2], [(1, 1), (2, 2)], Color(0, 0, 0))
        got = [(c.center, c.area_fraction) for c in cands]
        assert got == [((1, 1), 0.1), ((1, 1), 0.2), ((2, 2), 0.1), ((2, 2), 0.2)]

    def test_empty_inputs(self):
        with pytest.raises(InvalidParameterError):
            generate_candidates((64, 64), [], [(1, 1)], Color(0, 0, 0))
        with pytest.raises(InvalidParameterError):
            generate_candidates((64, 64), [0.1], [], Color(0, 0, 0))


class TestColorSampling:
    def test_reproducible(self):
        a = [sample_color(np.random.default_rng(42)) for _ in range(3)]
        b = [sample_color(np.random.default_rng(42)) for _ in range(3)]
        assert a == b

    def test_two_seeds_differ_quickly(self):
        g1, g2 = np.random.default_rng(1), np.random.default_rng(2)
        draws1 = [sample_color(g1) for _ in range(4)]
        draws2 = [sample_color(g2) for _ in range(4)]
        assert draws1 != draws2

    def test_uniform_mean(self):
        rng = np.random.default_rng(7)
        samples = np.array([sample_color(rng).as_tuple() for _ in range(10_000)])
        means = samples.mean(axis=0)
        assert np.all(np.abs(means - 127.5) < 5.0)


class TestIO:
    def test_png_round_trip(self, tmp_path):
        rng = np.random.default_rng(5)
        img = from_uint8(rng.integers(0, 256, (17, 23, 3), dtype=np.uint8))
        path = tmp_path / "img.png"
        save_png(img, path)
        back = load_png(path)
        assert np.array_equal(to_uint8(back), to_uint8(img))

    def test_alpha_dropped(self, tmp_path):
        from PIL import Image as PILImage

        rgba = np.zeros((4, 4, 4), dtype=np.uint8)
        rgba[..., 0] = 200
        rgba[..., 3] = 128
        path = tmp_path / "a.png"
        PILImage.fromarray(rgba, mode="RGBA").save(path)
        img = load_png(path)
        assert img.shape == (4, 4, 3)
        assert np.allclose(img[..., 0], 200 / 255)

    def test_uint8_conversions_exact(self):
        bytes_in = np.repeat(np.arange(256, dtype=np.uint8), 3).reshape(16, 16, 3)
        img = from_uint8(bytes_in)
        assert np.array_equal(to_uint8(img), bytes_in)


class TestResize:
    def test_shape(self):
        rng = np.random.default_rng(0)
        img = rng.uniform(0, 1, (256, 256, 3))
        assert resize_bilinear(img, (224, 224)).shape == (224, 224, 3)

    def test_constant_preserved_exactly(self):
        img = np.full((50, 30, 3), 0.37)
        out = resize_bilinear(img, (224, 224))
        assert np.array_equal(out, np.full((224, 224, 3), 0.37))

    def test_identity_is_copy(self):
        rng = np.random.default_rng(0)
        img = rng.uniform(0, 1, (16, 16, 3))
        out = resize_bilinear(img, (16, 16))
        assert np.array_equal(out, img)
        assert out is not img

    def test_bad_dims(self):
        with pytest.raises(InvalidParameterError):
            resize_bilinear(np.zeros((4, 4, 3)), (0, 10))
