import pytest

from clsr.flops import (
    FlopsBreakdown,
    bilinear_flops,
    conv2d_flops,
    flops_estimate,
    post_crop_flops,
    pre_crop_flops,
)

from conftest import tiny_config


def test_single_conv_hand_formula():
    assert conv2d_flops(3, 1, 1, 8, 8) == 2 * 9 * 1 * 1 * 64 == 1152
    assert conv2d_flops(1, 16, 32, 5, 7) == 2 * 1 * 16 * 32 * 35


def test_bilinear_convention():
    assert bilinear_flops(3, 10, 10) == 8 * 3 * 100


def test_breakdown_total_and_nonnegative():
    b = FlopsBreakdown(base=5, gcm=7, pim=11)
    assert b.total == 23
    assert b.to_dict() == {"base": 5, "gcm": 7, "pim": 11, "total": 23}


def test_n_rois_scales_base_only():
    cfg = tiny_config()
    one = flops_estimate(cfg, 12, (48, 48), n_rois=1, pad=4)
    five = flops_estimate(cfg, 12, (48, 48), n_rois=5, pad=4)
    assert five.base == 5 * one.base
    assert five.gcm == one.gcm
    assert five.pim == one.pim
    assert five.total == one.gcm + one.pim + 5 * one.base


def test_desk_scale_clsr_well_under_post_cropping():
    from clsr.config import ClsrConfig

    cfg = ClsrConfig().validate()  # desk defaults: c=32, stages (2,2,2), s=4
    ours = flops_estimate(cfg, 24, (384, 480), n_rois=1, pad=8).total
    post = post_crop_flops(cfg, (384, 480))
    assert ours < 0.05 * post


def test_flops_ordering_pre_ours_post():
    cfg = tiny_config()
    for ctx in [(48, 48), (96, 96), (60, 120)]:
        pre = pre_crop_flops(cfg, 12, pad=4)
        ours = flops_estimate(cfg, 12, ctx, pad=4).total
        post = post_crop_flops(cfg, ctx)
        assert pre < ours < post


def test_disabled_modules_zero_their_buckets():
    cfg = tiny_config()
    est = flops_estimate(cfg, 12, (48, 48), pad=4, use_gcm=False, use_pim=False)
    assert est.gcm == 0 and est.pim == 0
    assert est.base == pre_crop_flops(cfg, 12, pad=4)


def test_invalid_sizes_rejected():
    cfg = tiny_config()
    with pytest.raises(ValueError):
        flops_estimate(cfg, 0, (48, 48))
