import numpy as np
import pytest
import torch

from clsr.config import BackboneConfig, ClsrConfig, GcmConfig, TrainConfig


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def tiny_config(channels=8, blocks=(1, 1), scale=2, heads=2, n_max=16) -> ClsrConfig:
    cfg = ClsrConfig(
        backbone=BackboneConfig(channels=channels, blocks_per_stage=blocks, scale=scale),
        gcm=GcmConfig(r=6, n_max=n_max, heads=heads, factor=2, fuse_stage=min(1, len(blocks) - 1)),
        train=TrainConfig(context_patch=30, roi_patch=12, pad=4, iters=10,
                          pretrain_iters=0, batch_size=2),
    )
    return cfg.validate()


@pytest.fixture
def tiny_cfg():
    return tiny_config()


@pytest.fixture
def tiny_model(tiny_cfg):
    torch.manual_seed(0)
    from clsr.model import ClsrModel

    return ClsrModel(tiny_cfg)


def rand_image(rng, c=3, h=32, w=32):
    return rng.random((c, h, w), dtype=np.float32)
