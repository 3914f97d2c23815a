import numpy as np
import pytest

from clsr.core.image import (
    RoiBox,
    SamplePair,
    crop,
    crop_hr,
    crop_with_reflect,
    grow_box,
    pad_from_context,
    reflect_index,
)

from conftest import rand_image


def test_crop_full_image_is_identity(rng):
    img = rand_image(rng, h=7, w=9)
    out = crop(img, RoiBox(0, 0, 7, 9))
    np.testing.assert_array_equal(out, img)


def test_crop_central_2x2():
    img = np.arange(16, dtype=np.float32).reshape(1, 4, 4)
    out = crop(img, RoiBox(1, 1, 2, 2))
    np.testing.assert_array_equal(out[0], [[5, 6], [9, 10]])


def test_crop_out_of_bounds_raises(rng):
    img = rand_image(rng, h=8, w=8)
    with pytest.raises(ValueError):
        crop(img, RoiBox(4, 4, 8, 2))
    with pytest.raises(ValueError):
        crop(img, RoiBox(-1, 0, 2, 2))


def test_crop_hr_scales_box(rng):
    hr = rand_image(rng, h=96, w=96)
    out = crop_hr(hr, RoiBox(0, 0, 24, 24), 4)
    assert out.shape == (3, 96, 96)
    sub = crop_hr(hr, RoiBox(1, 2, 3, 4), 4)
    np.testing.assert_array_equal(sub, hr[:, 4:16, 8:24])


def test_sample_pair_shape_invariant(rng):
    lr = rand_image(rng, h=8, w=8)
    hr = rand_image(rng, h=32, w=32)
    SamplePair(lr=lr, hr=hr, scale=4)
    with pytest.raises(ValueError):
        SamplePair(lr=lr, hr=hr, scale=2)


def test_pad_zero_is_plain_crop(rng):
    img = rand_image(rng, h=16, w=16)
    box = RoiBox(4, 5, 6, 7)
    patch, inner = pad_from_context(img, box, 0)
    np.testing.assert_array_equal(patch, crop(img, box))
    assert inner == RoiBox(0, 0, 6, 7)


def test_pad_interior_uses_real_context(rng):
    img = rand_image(rng, h=64, w=64)
    box = RoiBox(20, 20, 8, 8)
    patch, inner = pad_from_context(img, box, 8)
    assert patch.shape == (3, 24, 24)
    np.testing.assert_array_equal(patch, img[:, 12:36, 12:36])
    assert (inner.top, inner.left) == (8, 8)


def test_pad_at_corner_reflects_border_rows(rng):
    img = rand_image(rng, h=12, w=12)
    patch, _ = pad_from_context(img, RoiBox(0, 0, 6, 6), 2)
    assert patch.shape == (3, 10, 10)
    # rows above the image are mirror reflections about row 0
    np.testing.assert_array_equal(patch[:, 0, 2:8], img[:, 2, :6])
    np.testing.assert_array_equal(patch[:, 1, 2:8], img[:, 1, :6])
    # left columns likewise
    np.testing.assert_array_equal(patch[:, 2:8, 0], img[:, :6, 2])
    np.testing.assert_array_equal(patch[:, 2:8, 1], img[:, :6, 1])


def test_crop_then_pad_zero_identity_on_roi(rng):
    img = rand_image(rng)
    box = RoiBox(3, 9, 10, 11)
    patch, inner = pad_from_context(img, box, 0)
    np.testing.assert_array_equal(
        patch[:, inner.top : inner.top + box.height, inner.left : inner.left + box.width],
        crop(img, box),
    )


def test_reflect_index_matches_numpy_pad():
    n = 7
    arr = np.arange(n, dtype=np.float64)
    padded = np.pad(arr, 4, mode="reflect")
    ours = arr[reflect_index(np.arange(-4, n + 4), n)]
    np.testing.assert_array_equal(ours, padded)


def test_reflect_index_handles_huge_offsets():
    idx = reflect_index(np.array([-25, 40]), 6)
    assert ((0 <= idx) & (idx < 6)).all()


def test_crop_with_reflect_interior_equals_slice(rng):
    img = rand_image(rng, h=20, w=20)
    out = crop_with_reflect(img, 3, 4, 5, 6)
    np.testing.assert_array_equal(out, img[:, 3:8, 4:10])


def test_grow_box_alignment():
    g = grow_box(RoiBox(5, 5, 9, 9), 2, align=2)
    assert (g.height, g.width) == (14, 14)
    assert (g.inner_top, g.inner_left) == (2, 2)
    g = grow_box(RoiBox(0, 0, 8, 8), 0, align=4)
    assert (g.height, g.width) == (8, 8)
