import numpy as np
import pytest
import torch
import torch.nn.functional as F

from clsr.backbone import Backbone, ResidualBlock, UpsampleHead
from clsr.config import BackboneConfig


def make_backbone(channels=8, blocks=(1, 1), scale=2, seed=0):
    torch.manual_seed(seed)
    return Backbone(BackboneConfig(channels=channels, blocks_per_stage=blocks, scale=scale))


def zero_params(module):
    with torch.no_grad():
        for p in module.parameters():
            p.zero_()


def test_shallow_zero_input_zero_bias():
    net = make_backbone()
    with torch.no_grad():
        net.shallow.bias.zero_()
        out = net.shallow_extract(torch.zeros(1, 3, 5, 5))
    assert out.abs().max() == 0


def test_shallow_1x1_input_shape():
    net = make_backbone(channels=6)
    out = net.shallow_extract(torch.rand(1, 3, 1, 1))
    assert out.shape == (1, 6, 1, 1)


def test_shallow_ones_kernel_hand_convolution():
    net = make_backbone(channels=4)
    with torch.no_grad():
        net.shallow.weight.fill_(1.0)
        net.shallow.bias.zero_()
    x = torch.full((1, 3, 6, 6), 0.25)
    out = net.shallow_extract(x)
    # interior pixels: 3x3 window over 3 channels of 0.25 each
    assert out[0, 0, 2, 2].item() == pytest.approx(9 * 3 * 0.25, abs=1e-6)


def test_stage_zero_weights_is_identity():
    net = make_backbone()
    zero_params(net.stages[0])
    z = torch.rand(2, 8, 7, 7)
    out = net.run_stage(z, 0)
    assert torch.equal(out, z)


def test_single_block_hand_computation():
    # 1x1-equivalent kernels: only the center tap is nonzero
    torch.manual_seed(0)
    block = ResidualBlock(1)
    with torch.no_grad():
        block.conv1.weight.zero_()
        block.conv1.weight[0, 0, 1, 1] = 2.0
        block.conv1.bias.fill_(0.5)
        block.conv2.weight.zero_()
        block.conv2.weight[0, 0, 1, 1] = -1.0
        block.conv2.bias.fill_(0.25)
    x = torch.full((1, 1, 1, 1), 3.0)
    # conv1: 2*3 + 0.5 = 6.5 ; relu keeps it ; conv2: -6.5 + 0.25 = -6.25 ; skip: 3
    out = block(x)
    assert out.item() == pytest.approx(3.0 - 6.25, abs=1e-6)


def test_stage_determinism():
    net = make_backbone()
    z = torch.rand(1, 8, 9, 9)
    a = net.run_stage(z, 0)
    b = net.run_stage(z, 0)
    assert torch.equal(a, b)


def test_upsample_head_zero_weights_is_bilinear():
    net = make_backbone(scale=4, channels=8, blocks=(1,))
    zero_params(net)
    rgb = torch.rand(1, 3, 6, 6)
    out = net(rgb, ())
    expected = F.interpolate(rgb, size=(24, 24), mode="bilinear", align_corners=False)
    assert torch.equal(out, expected)


def test_upsample_head_shape():
    net = make_backbone(scale=4)
    out = net(torch.rand(1, 3, 6, 6), ())
    assert out.shape == (1, 3, 24, 24)


def test_pixel_shuffle_block_layout():
    ps = torch.nn.PixelShuffle(2)
    x = torch.tensor([[[[1.0]], [[2.0]], [[3.0]], [[4.0]]]])  # channels a,b,c,d at one pixel
    out = ps(x)
    assert torch.equal(out[0, 0], torch.tensor([[1.0, 2.0], [3.0, 4.0]]))


def test_non_power_of_two_scale_rejected():
    with pytest.raises(ValueError):
        UpsampleHead(8, 3)


def test_forward_empty_fusers_matches_identity_fusers():
    net = make_backbone()
    rgb = torch.rand(1, 3, 8, 8)
    plain = net(rgb, ())
    same = net(rgb, [lambda i, z: z])
    assert torch.equal(plain, same)


def test_forward_constant_fuser_changes_and_restores():
    net = make_backbone()
    rgb = torch.rand(1, 3, 8, 8)
    plain = net(rgb, ())
    bumped = net(rgb, [lambda i, z: z + 0.1 if i == 0 else z])
    assert not torch.equal(plain, bumped)
    again = net(rgb, ())
    assert torch.equal(plain, again)


def test_stage_preserves_spatial_size():
    net = make_backbone(blocks=(2, 1))
    z = net.shallow_extract(torch.rand(1, 3, 11, 13))
    for i in range(net.num_stages):
        z = net.run_stage(z, i)
        assert z.shape[-2:] == (11, 13)


def test_backbone_gradients_match_finite_differences():
    torch.manual_seed(3)
    net = Backbone(BackboneConfig(channels=4, blocks_per_stage=(1,), scale=2)).double()
    rgb = torch.rand(1, 3, 6, 6, dtype=torch.float64)
    # offset target keeps every residual away from the L1 kink under +-h
    target = net(rgb, ()).detach() + 0.5

    def loss_fn():
        return (net(rgb, ()) - target).abs().mean()

    loss = loss_fn()
    loss.backward()
    h = 1e-3
    checked = 0
    for name, p in net.named_parameters():
        flat = p.detach().reshape(-1)
        for idx in [0, flat.numel() // 2]:
            orig = flat[idx].item()
            with torch.no_grad():
                flat[idx] = orig + h
                up = loss_fn().item()
                flat[idx] = orig - h
                down = loss_fn().item()
                flat[idx] = orig
            fd = (up - down) / (2 * h)
            analytic = p.grad.reshape(-1)[idx].item()
            rel = abs(analytic - fd) / max(abs(analytic), abs(fd), 1e-6)
            assert rel < 1e-4, f"{name}[{idx}]: analytic {analytic} vs fd {fd}"
            checked += 1
    assert checked > 10
