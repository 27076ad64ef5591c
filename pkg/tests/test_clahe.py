import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from oracles import global_histogram_equalization

from nerfholo.clahe import clahe, clahe_plane, tile_mappings
from nerfholo.field import RealImage

images = arrays(np.float64, st.tuples(st.integers(8, 40), st.integers(8, 40)),
                elements=st.floats(0.0, 1.0, allow_nan=False))


@given(images)
def test_global_equalization_matches_sort_oracle(img):
    out = clahe_plane(img, (1, 1), math.inf, 256)
    ref = global_histogram_equalization(img, 256)
    assert np.max(np.abs(out - ref)) <= 1 / 255


@given(images, st.integers(1, 4), st.integers(1, 4), st.floats(1.0, 8.0))
def test_output_bounded(img, tx, ty, clip):
    out = clahe_plane(img, (tx, ty), clip, 64)
    assert out.min() >= 0.0 and out.max() <= 1.0


@given(st.floats(0.0, 1.0), st.integers(1, 4), st.integers(1, 4))
def test_constant_image_is_fixed_point(value, tx, ty):
    img = np.full((16, 20), value)
    np.testing.assert_array_equal(clahe_plane(img, (tx, ty), 2.0, 256), img)


@given(images, st.integers(1, 3), st.integers(1, 3), st.floats(1.0, 10.0))
def test_tile_mappings_non_decreasing(img, tx, ty, clip):
    luts, identity, _, _ = tile_mappings(img, (tx, ty), clip, 32)
    assert np.all(np.diff(luts[~identity], axis=-1) >= -1e-12)


def test_equalization_is_idempotent_within_one_level(rng):
    img = rng.beta(2, 5, size=(64, 64))
    once = clahe_plane(img, (1, 1), math.inf, 256)
    twice = clahe_plane(once, (1, 1), math.inf, 256)
    assert np.max(np.abs(twice - once)) <= 1 / 255 + 1e-12


def test_equalization_flattens_histogram(rng):
    img = rng.beta(2, 8, size=(128, 128))
    out = clahe_plane(img, (1, 1), math.inf, 256)
    hist, _ = np.histogram(out, bins=8, range=(0, 1))
    assert hist.max() < 1.5 * hist.mean()


def test_clip_limit_bounds_contrast_gain(rng):
    # a low-contrast ramp is stretched less when the clip limit is lower
    img = 0.45 + 0.1 * rng.uniform(size=(64, 64))
    spread = [np.ptp(clahe_plane(img, (2, 2), clip, 256)) for clip in (1.0, 2.0, 8.0, math.inf)]
    assert spread[0] < 0.2  # clip 1 spreads all mass uniformly: the mapping stays near identity
    assert all(a <= b + 1e-9 for a, b in zip(spread, spread[1:]))


def test_tiles_blend_without_seams():
    # left half dark, right half bright: the interpolated result has no jump inside a tile row
    img = np.concatenate([np.full((32, 32), 0.2), np.full((32, 32), 0.8)], axis=1)
    img = img + np.linspace(0, 0.05, 64)[None, :]
    out = clahe_plane(img, (4, 4), 2.0, 256)
    assert np.max(np.abs(np.diff(out[:, :30], axis=1))) < 0.2


def test_colour_planes_processed_independently(rng):
    rgb = rng.uniform(size=(16, 16, 3))
    out = clahe(RealImage(rgb), (2, 2), 3.0, 64)
    for c in range(3):
        np.testing.assert_array_equal(out.data[..., c], clahe_plane(rgb[..., c], (2, 2), 3.0, 64))


@pytest.mark.parametrize("kwargs", [dict(tiles=(0, 1)), dict(clip_limit=0.5), dict(bins=1),
                                    dict(tiles=(20, 1))])
def test_invalid_parameters(kwargs):
    with pytest.raises(ValueError):
        clahe_plane(np.zeros((8, 8)), **kwargs)
