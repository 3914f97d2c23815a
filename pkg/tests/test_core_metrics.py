import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clsr.core.metrics import gaussian_window, luma, psnr, ssim

from conftest import rand_image


def oracle_psnr(a, b, peak=1.0):
    diff = a.astype(np.float64).ravel() - b.astype(np.float64).ravel()
    mse = float(np.dot(diff, diff) / diff.size)
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def oracle_ssim(a, b):
    """Sliding-window double-precision SSIM, one window at a time."""
    x = luma(a)
    y = luma(b)
    win = gaussian_window()
    c1, c2 = 0.01**2, 0.03**2
    h, w = x.shape
    vals = []
    for i in range(h - 10):
        for j in range(w - 10):
            wx = x[i : i + 11, j : j + 11]
            wy = y[i : i + 11, j : j + 11]
            mx = float((win * wx).sum())
            my = float((win * wy).sum())
            vx = float((win * wx * wx).sum()) - mx * mx
            vy = float((win * wy * wy).sum()) - my * my
            cxy = float((win * wx * wy).sum()) - mx * my
            vals.append(
                ((2 * mx * my + c1) * (2 * cxy + c2))
                / ((mx * mx + my * my + c1) * (vx + vy + c2))
            )
    return float(np.mean(vals))


def test_psnr_identical_is_infinite(rng):
    img = rand_image(rng)
    assert psnr(img, img) == math.inf


def test_psnr_zero_vs_one_is_zero_db():
    a = np.zeros((3, 4, 4), dtype=np.float32)
    b = np.ones((3, 4, 4), dtype=np.float32)
    assert psnr(a, b) == pytest.approx(0.0, abs=1e-12)


def test_psnr_matches_oracle_on_random_pairs(rng):
    for _ in range(50):
        a, b = rand_image(rng, h=9, w=7), rand_image(rng, h=9, w=7)
        assert psnr(a, b) == pytest.approx(oracle_psnr(a, b), abs=1e-9)


def test_psnr_symmetry(rng):
    a, b = rand_image(rng), rand_image(rng)
    assert psnr(a, b) == pytest.approx(psnr(b, a), abs=1e-12)


def test_psnr_shape_mismatch(rng):
    with pytest.raises(ValueError):
        psnr(rand_image(rng, h=4, w=4), rand_image(rng, h=4, w=5))


@settings(max_examples=25, deadline=None)
@given(peak=st.floats(0.5, 2.0), seed=st.integers(0, 10_000))
def test_psnr_peak_shift_property(peak, seed):
    r = np.random.default_rng(seed)
    a, b = r.random((3, 5, 5)), r.random((3, 5, 5))
    base = psnr(a, b, peak=1.0)
    shifted = psnr(a, b, peak=peak)
    assert shifted == pytest.approx(base + 20 * math.log10(peak), abs=1e-9)


def test_ssim_identical_is_one(rng):
    img = rand_image(rng, h=16, w=16)
    assert ssim(img, img) == pytest.approx(1.0, abs=1e-9)


def test_ssim_constant_images_closed_form():
    a = np.full((3, 12, 12), 0.2, dtype=np.float32)
    b = np.full((3, 12, 12), 0.8, dtype=np.float32)
    # variances vanish: only the luminance term remains
    mx, my = 0.2, 0.8
    c1, c2 = 0.01**2, 0.03**2
    expected = ((2 * mx * my + c1) * c2) / ((mx * mx + my * my + c1) * c2)
    assert ssim(a, b) == pytest.approx(expected, abs=1e-6)


def test_ssim_matches_windowed_oracle(rng):
    a = rand_image(rng, h=14, w=13)
    b = np.clip(a + 0.1 * rng.standard_normal(a.shape).astype(np.float32), 0, 1)
    assert ssim(a, b) == pytest.approx(oracle_ssim(a, b), abs=1e-6)


def test_ssim_random_pairs_match_oracle(rng):
    for _ in range(5):
        a, b = rand_image(rng, h=12, w=12), rand_image(rng, h=12, w=12)
        assert ssim(a, b) == pytest.approx(oracle_ssim(a, b), abs=1e-6)


def test_ssim_requires_window_sized_patch(rng):
    with pytest.raises(ValueError):
        ssim(rand_image(rng, h=10, w=16), rand_image(rng, h=10, w=16))


def test_luma_bt601_weights():
    img = np.zeros((3, 2, 2), dtype=np.float32)
    img[0] = 1.0
    assert luma(img)[0, 0] == pytest.approx(0.299)
    img = np.ones((3, 2, 2), dtype=np.float32)
    assert luma(img)[0, 0] == pytest.approx(1.0)
