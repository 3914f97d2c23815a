from .image import (
    PaddedBox,
    RoiBox,
    SamplePair,
    check_image,
    crop,
    crop_hr,
    crop_with_reflect,
    grow_box,
    pad_from_context,
    reflect_index,
)
from .io import (
    ImageDecodeError,
    decode_png_bytes,
    encode_png_bytes,
    load_manifest,
    load_png,
    save_manifest,
    save_png,
)
from .metrics import gaussian_window, luma, psnr, ssim
from .resize import bicubic_resize, bilinear_resize, degrade, resize

__all__ = [
    "PaddedBox",
    "RoiBox",
    "SamplePair",
    "check_image",
    "crop",
    "crop_hr",
    "crop_with_reflect",
    "grow_box",
    "pad_from_context",
    "reflect_index",
    "ImageDecodeError",
    "decode_png_bytes",
    "encode_png_bytes",
    "load_manifest",
    "load_png",
    "save_manifest",
    "save_png",
    "gaussian_window",
    "luma",
    "psnr",
    "ssim",
    "bicubic_resize",
    "bilinear_resize",
    "degrade",
    "resize",
]
