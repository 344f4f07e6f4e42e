"""Planar float image container, PNG I/O and PSNR.

Images are stored channel-first (C, H, W) as float32 in nominal [0, 1].
Grayscale files are replicated to 3 channels on load so the rest of the
pipeline can assume RGB; single-channel images (weight masks, sigma maps)
can still be constructed directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import cv2
import numpy as np

from .errors import DataError

# PSNR returned for a zero-MSE pair; any finite cap >= 200 dB works as a
# sentinel, this one is comfortably above the float32 quantization floor.
PSNR_CAP_DB = 300.0


@dataclass(frozen=True)
class ImagePlanar:
    """Float image, planar (C, H, W) layout, values nominally in [0, 1]."""

    data: np.ndarray  # (channels, height, width), float32

    def __post_init__(self):
        if self.data.ndim != 3:
            raise DataError(f"expected (C, H, W) array, got shape {self.data.shape}")
        if self.data.shape[0] not in (1, 3):
            raise DataError(f"channel count must be 1 or 3, got {self.data.shape[0]}")

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]


def from_array(arr: np.ndarray) -> ImagePlanar:
    """Wrap an array as an ImagePlanar; 2D arrays become single-channel."""
    a = np.asarray(arr, dtype=np.float32)
    if a.ndim == 2:
        a = a[None]
    return ImagePlanar(np.ascontiguousarray(a))


def load_png(path: str) -> ImagePlanar:
    """Load an 8/16-bit grayscale or RGB PNG as a planar float image.

    8-bit values scale by 1/255, 16-bit by 1/65535; alpha is dropped and
    grayscale is replicated to 3 channels.
    """
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise DataError(f"cannot read PNG file: {path}")
    if raw.dtype == np.uint8:
        scale = 1.0 / 255.0
    elif raw.dtype == np.uint16:
        scale = 1.0 / 65535.0
    else:
        raise DataError(
            f"unsupported PNG sample type {raw.dtype} in {path} (expected 8- or 16-bit)"
        )
    if raw.ndim == 2:
        planes = np.repeat(raw[None], 3, axis=0)
    elif raw.ndim == 3 and raw.shape[2] in (3, 4):
        rgb = raw[:, :, 2::-1]  # BGR(A) -> RGB, alpha dropped
        planes = np.moveaxis(rgb, 2, 0)
    else:
        chans = raw.shape[2] if raw.ndim == 3 else raw.ndim
        raise DataError(f"unsupported PNG color type ({chans} channels) in {path}")
    return ImagePlanar(np.ascontiguousarray(planes.astype(np.float32) * scale))


def save_png(image: ImagePlanar, path: str, bit_depth: int = 8) -> None:
    """Clamp to [0, 1], quantize (round half up) and write a PNG."""
    if bit_depth == 8:
        peak, dtype = 255.0, np.uint8
    elif bit_depth == 16:
        peak, dtype = 65535.0, np.uint16
    else:
        raise DataError(f"bit_depth must be 8 or 16, got {bit_depth}")
    clamped = np.clip(image.data.astype(np.float64), 0.0, 1.0)
    quant = np.floor(clamped * peak + 0.5).astype(dtype)
    if image.channels == 1:
        out = quant[0]
    else:
        out = np.moveaxis(quant, 0, 2)[:, :, ::-1]  # RGB -> BGR for the writer
    if not cv2.imwrite(str(path), out):
        raise DataError(f"cannot write PNG file: {path}")


def psnr(a: ImagePlanar, b: ImagePlanar) -> float:
    """PSNR in dB with peak 1.0, single MSE over all pixels and channels."""
    if a.data.shape != b.data.shape:
        raise DataError(
            f"dimension mismatch: {a.data.shape} vs {b.data.shape}"
        )
    diff = a.data.astype(np.float64) - b.data.astype(np.float64)
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(10.0 * math.log10(1.0 / mse), PSNR_CAP_DB)
