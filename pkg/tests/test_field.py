import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nerfholo.field import (MAX_PIXELS, ComplexField, RealImage, crop_center, crop_center_array, fft2,
                            fftshift, frequency_grid, ifftshift, pad_center, pad_center_array)

dims = st.integers(min_value=1, max_value=48)


@given(dims, dims, st.integers(0, 2**32 - 1))
def test_parseval(h, w, seed):
    rng = np.random.default_rng(seed)
    f = ComplexField(rng.normal(size=(h, w)) + 1j * rng.normal(size=(h, w)), 8e-6)
    F = fft2(f)
    assert F.energy() == pytest.approx(f.energy(), rel=1e-10)


@given(dims, dims, st.integers(0, 2**32 - 1))
def test_fft_round_trip(h, w, seed):
    rng = np.random.default_rng(seed)
    f = ComplexField(rng.normal(size=(h, w)) + 1j * rng.normal(size=(h, w)), 1e-6)
    back = fft2(fft2(f), "inverse")
    np.testing.assert_allclose(back.data, f.data, atol=1e-12)


def test_impulse_at_origin_transforms_to_flat_spectrum():
    # unitary 8x8 DFT of a unit impulse at (0, 0): every bin is 1/sqrt(64)
    f = ComplexField.impulse(8, 8, 8e-6, at=(0, 0))
    np.testing.assert_allclose(fft2(f).data, np.full((8, 8), 1 / 8), atol=1e-15)


def test_dft_matches_explicit_sum(rng):
    h, w = 5, 7
    x = rng.normal(size=(h, w)) + 1j * rng.normal(size=(h, w))
    m, n = np.indices((h, w))
    ref = np.empty((h, w), complex)
    for k in range(h):
        for l in range(w):
            ref[k, l] = np.sum(x * np.exp(-2j * np.pi * (k * m / h + l * n / w)))
    np.testing.assert_allclose(fft2(ComplexField(x, 1e-6)).data, ref / np.sqrt(h * w), atol=1e-12)


def test_shift_round_trip(rng):
    f = ComplexField(rng.normal(size=(5, 6)), 1e-6)
    np.testing.assert_array_equal(ifftshift(fftshift(f)).data, f.data)
    assert fftshift(ComplexField.impulse(4, 4, 1e-6, at=(0, 0))).data[2, 2] == 1


def test_frequency_grid():
    fx, fy = frequency_grid(4, 6, 2e-6)
    np.testing.assert_allclose(fx.ravel(), np.fft.fftfreq(6, 2e-6))
    np.testing.assert_allclose(fy.ravel(), np.fft.fftfreq(4, 2e-6))
    assert fx.shape == (1, 6) and fy.shape == (4, 1)


@given(st.integers(1, 20), st.integers(1, 20), st.integers(0, 10), st.integers(0, 10))
def test_pad_crop_round_trip(h, w, dh, dw):
    arr = np.arange(h * w, dtype=complex).reshape(h, w) + 1
    padded = pad_center_array(arr, h + dh, w + dw)
    assert padded.shape == (h + dh, w + dw)
    assert np.sum(np.abs(padded)) == pytest.approx(np.sum(np.abs(arr)))
    np.testing.assert_array_equal(crop_center_array(padded, h, w), arr)


def test_pad_keeps_centre_pixel():
    f = ComplexField.impulse(5, 4, 1e-6)
    p = pad_center(f, 10, 9)
    assert p.data[9 // 2, 10 // 2] == 1
    assert crop_center(p, 4, 5).data[2, 2] == 1


def test_field_is_immutable_and_validated():
    f = ComplexField(np.ones((2, 2)), 1e-6)
    with pytest.raises(ValueError):
        f.data[0, 0] = 2
    with pytest.raises(ValueError):
        ComplexField(np.ones(3), 1e-6)
    with pytest.raises(ValueError):
        ComplexField(np.array([[np.nan]]), 1e-6)
    with pytest.raises(ValueError):
        ComplexField(np.ones((2, 2)), 0.0)


def test_oversized_field_rejected_before_allocation():
    side = int(np.sqrt(MAX_PIXELS)) + 1
    with pytest.raises(OverflowError):
        ComplexField(np.broadcast_to(np.complex64(0), (side, side)), 1e-6)


def test_real_image_shapes():
    assert RealImage(np.zeros((3, 4))).channels == 1
    assert RealImage(np.zeros((3, 4, 3))).channels == 3
    with pytest.raises(ValueError):
        RealImage(np.zeros((3, 4, 2)))
    with pytest.raises(ValueError):
        RealImage(np.full((2, 2), np.inf))
    np.testing.assert_array_equal(RealImage(np.array([[-1.0, 2.0]])).clamp().data[..., 0], [[0.0, 1.0]])
