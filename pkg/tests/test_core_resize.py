import numpy as np
import pytest

from clsr.core.resize import bicubic_resize, bilinear_resize, cubic_kernel, degrade, resize

from conftest import rand_image


def oracle_resize(img, out_h, out_w, kernel="bicubic"):
    """Direct double-precision evaluation of the separable kernel sum.

    Deliberately written as plain per-pixel loops, independent of the
    vectorized implementation: same half-pixel grid, widened (anti-aliasing)
    kernel when shrinking, clamped source indices, normalized weights.
    """

    def kern(x):
        if kernel == "bicubic":
            a = -0.5
            x = abs(x)
            if x <= 1:
                return (a + 2) * x**3 - (a + 3) * x**2 + 1
            if x < 2:
                return a * x**3 - 5 * a * x**2 + 8 * a * x - 4 * a
            return 0.0
        x = abs(x)
        return 1.0 - x if x < 1 else 0.0

    support = 4.0 if kernel == "bicubic" else 2.0

    def axis_pass(plane, in_size, out_size, axis):
        scale = out_size / in_size
        width = support / scale if scale < 1 else support
        shape = list(plane.shape)
        shape[axis] = out_size
        out = np.zeros(shape, dtype=np.float64)
        for i in range(out_size):
            u = (i + 0.5) / scale - 0.5
            lo = int(np.floor(u - width / 2)) + 1
            js = range(lo, lo + int(np.ceil(width)) + 2)
            ws = [kern((u - j) * scale) if scale < 1 else kern(u - j) for j in js]
            total = sum(ws)
            acc = np.zeros([s for k, s in enumerate(shape) if k != axis])
            for j, wgt in zip(js, ws):
                jj = min(max(j, 0), in_size - 1)
                acc = acc + wgt / total * np.take(plane, jj, axis=axis)
            out_idx = [slice(None)] * len(shape)
            out_idx[axis] = i
            out[tuple(out_idx)] = acc
        return out

    work = img.astype(np.float64)
    if out_h != img.shape[1]:
        work = axis_pass(work, img.shape[1], out_h, axis=1)
    if out_w != img.shape[2]:
        work = axis_pass(work, img.shape[2], out_w, axis=2)
    return np.clip(work, 0.0, 1.0)


def test_constant_image_preserved():
    img = np.full((3, 9, 13), 0.3, dtype=np.float32)
    for out_hw in [(18, 26), (5, 7), (9, 40)]:
        out = bicubic_resize(img, *out_hw)
        np.testing.assert_allclose(out, 0.3, atol=1e-7)


def test_identity_size_returns_input(rng):
    img = rand_image(rng, h=11, w=8)
    out = bicubic_resize(img, 11, 8)
    np.testing.assert_array_equal(out, img)


def test_ramp_downsample_matches_oracle():
    ramp = np.linspace(0, 1, 64, dtype=np.float64).reshape(8, 8)
    img = np.stack([ramp, ramp.T, ramp * 0.5]).astype(np.float32)
    out = bicubic_resize(img, 2, 2)
    expected = oracle_resize(img, 2, 2)
    np.testing.assert_allclose(out, expected, atol=1e-6)


@pytest.mark.parametrize("kernel", ["bicubic", "bilinear"])
@pytest.mark.parametrize("out_hw", [(6, 6), (13, 5), (24, 40), (17, 17)])
def test_random_resizes_match_oracle(rng, kernel, out_hw):
    img = rand_image(rng, h=12, w=10)
    out = resize(img, *out_hw, kernel=kernel)
    expected = oracle_resize(img, *out_hw, kernel=kernel)
    np.testing.assert_allclose(out, expected, atol=1e-6)


def test_cubic_kernel_properties():
    assert cubic_kernel(np.array(0.0)) == 1.0
    assert cubic_kernel(np.array(1.0)) == 0.0
    assert cubic_kernel(np.array(2.0)) == 0.0
    # partition of unity at integer offsets
    xs = np.array([-1.5, -0.5, 0.5, 1.5])
    np.testing.assert_allclose(cubic_kernel(xs).sum(), 1.0, atol=1e-12)


def test_bilinear_upsample_matches_oracle(rng):
    img = rand_image(rng, h=6, w=6)
    np.testing.assert_allclose(
        bilinear_resize(img, 12, 12), oracle_resize(img, 12, 12, "bilinear"), atol=1e-6
    )


def test_degrade_requires_divisible_size(rng):
    with pytest.raises(ValueError):
        degrade(rand_image(rng, h=10, w=12), 4)
    out = degrade(rand_image(rng, h=16, w=32), 4)
    assert out.shape == (3, 4, 8)


def test_output_size_validation(rng):
    with pytest.raises(ValueError):
        resize(rand_image(rng), 0, 4)
    with pytest.raises(ValueError):
        resize(rand_image(rng), 4, 4, kernel="lanczos")
