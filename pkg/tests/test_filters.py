from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trojscan.errors import InvalidParameterError
from trojscan.filters import FilterType, apply_filter, list_filters
from trojscan.imaging import load_png, to_uint8

GOLDEN_DIR = Path(__file__).parent / "golden" / "filters"


def test_list_filters_order_and_codes():
    filters = list_filters()
    assert [f.name for f in filters] == ["GOTHAM", "NASHVILLE", "KELVIN", "LOMO", "TOASTER"]
    assert [int(f) for f in filters] == [0, 1, 2, 3, 4]
    assert len(filters) == 5


def test_from_name():
    assert FilterType.from_name("kelvin") is FilterType.KELVIN
    assert FilterType.from_name("GOTHAM") is FilterType.GOTHAM
    with pytest.raises(InvalidParameterError):
        FilterType.from_name("sepia")


@pytest.mark.parametrize("ftype", list_filters())
def test_dims_range_determinism(ftype):
    rng = np.random.default_rng(int(ftype) + 10)
    img = rng.uniform(0, 1, (21, 34, 3))
    out = apply_filter(img, ftype)
    assert out.shape == img.shape
    assert out.min() >= 0.0 and out.max() <= 1.0
    assert np.array_equal(out, apply_filter(img, ftype))


@pytest.mark.parametrize("ftype", list_filters())
def test_input_not_mutated(ftype):
    rng = np.random.default_rng(3)
    img = rng.uniform(0, 1, (8, 8, 3))
    before = img.copy()
    apply_filter(img, ftype)
    assert np.array_equal(img, before)


def test_gotham_kills_channel_spread():
    rng = np.random.default_rng(4)
    img = rng.uniform(0, 1, (16, 16, 3))
    out = apply_filter(img, FilterType.GOTHAM)
    spread_in = img.max(axis=2) - img.min(axis=2)
    spread_out = out.max(axis=2) - out.min(axis=2)
    colored = spread_in > 0
    assert np.all(spread_out[colored] < spread_in[colored])
    gray = np.full((4, 4, 3), 0.5)
    out_gray = apply_filter(gray, FilterType.GOTHAM)
    assert np.all(out_gray.max(axis=2) - out_gray.min(axis=2) == 0)


@given(seed=st.integers(min_value=0, max_value=2**31))
@settings(max_examples=25, deadline=None)
def test_all_filters_preserve_invariants(seed):
    rng = np.random.default_rng(seed)
    img = rng.uniform(0, 1, (12, 12, 3))
    for ftype in list_filters():
        out = apply_filter(img, ftype)
        assert out.shape == img.shape
        assert out.min() >= 0.0 and out.max() <= 1.0


@pytest.mark.parametrize("ftype", list_filters())
def test_golden_conformance(ftype):
    name = ftype.name.lower()
    gin = load_png(GOLDEN_DIR / f"{name}_in.png")
    gout = load_png(GOLDEN_DIR / f"{name}_out.png")
    assert np.array_equal(to_uint8(apply_filter(gin, ftype)), to_uint8(gout))


def test_no_filter_is_identity_on_golden():
    for ftype in list_filters():
        name = ftype.name.lower()
        gin = load_png(GOLDEN_DIR / f"{name}_in.png")
        gout = load_png(GOLDEN_DIR / f"{name}_out.png")
        assert not np.array_equal(to_uint8(gin), to_uint8(gout))


def test_filters_pairwise_distinct_on_golden():
    gin = load_png(GOLDEN_DIR / "gotham_in.png")
    outs = [to_uint8(apply_filter(gin, f)) for f in list_filters()]
    for i in range(len(outs)):
        for j in range(i + 1, len(outs)):
            assert not np.array_equal(outs[i], outs[j])
