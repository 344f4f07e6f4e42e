"""Signal-dependent synthetic noise and ground-truth sigma maps.

Heteroscedastic Gaussian approximation of Poissonian-Gaussian sensor noise:
per pixel, variance = sigma_s^2 * intensity + sigma_c^2. Output is not
clamped by default so the noise stays zero-mean; clamping is an explicit
option used to reproduce the positive DC shift in dark areas.
"""

from __future__ import annotations

from dataclasses import dataclass

import cv2
import numpy as np

from .errors import ConfigError
from .image import ImagePlanar
from .sigma import SigmaMap

# Uniform sampling ranges used when generating benchmark datasets.
SIGMA_S_RANGE = (0.0, 0.16)
SIGMA_C_RANGE = (0.0, 0.06)


@dataclass(frozen=True)
class NoiseParams:
    sigma_s: float  # signal-dependent slope (variance per unit intensity)
    sigma_c: float  # signal-independent STD
    seed: int

    def __post_init__(self):
        if self.sigma_s < 0 or self.sigma_c < 0:
            raise ConfigError("noise STD parameters must be >= 0")


def _noise_std(clean: np.ndarray, params: NoiseParams) -> np.ndarray:
    return np.sqrt(params.sigma_s**2 * np.maximum(clean, 0.0) + params.sigma_c**2)


def add_noise(clean: ImagePlanar, params: NoiseParams, clamp: bool = False) -> ImagePlanar:
    """Draw one noisy realization; deterministic for a fixed seed."""
    rng = np.random.default_rng(params.seed)
    data = clean.data.astype(np.float64)
    noisy = data + rng.standard_normal(data.shape) * _noise_std(data, params)
    if clamp:
        noisy = np.clip(noisy, 0.0, 1.0)
    return ImagePlanar(noisy.astype(np.float32))


def ground_truth_sigma_map(clean: ImagePlanar, params: NoiseParams) -> SigmaMap:
    """Analytic per-pixel noise STD for the generator parameters."""
    return SigmaMap(_noise_std(clean.data.astype(np.float64), params))


def empirical_sigma_map(clean: ImagePlanar, params: NoiseParams, realizations: int = 12) -> SigmaMap:
    """Per-pixel sample STD of (noisy - clean) over K independent draws."""
    if realizations < 2:
        raise ConfigError(f"need at least 2 realizations, got {realizations}")
    rng = np.random.default_rng(params.seed)
    data = clean.data.astype(np.float64)
    std = _noise_std(data, params)
    acc = np.zeros_like(data)
    acc_sq = np.zeros_like(data)
    for _ in range(realizations):
        n = rng.standard_normal(data.shape) * std
        acc += n
        acc_sq += n * n
    var = (acc_sq - acc * acc / realizations) / (realizations - 1)
    return SigmaMap(np.sqrt(np.maximum(var, 0.0)))


def derive_seed(master_seed: int, index: int) -> int:
    """Declared per-image seed splitting rule for dataset generation."""
    return int(master_seed) + int(index)


def make_test_image(seed: int, size: int = 128) -> ImagePlanar:
    """Synthetic clean test image: smooth shading, soft blobs, sharp shapes
    and a dark strip (the dark region matters for DC-strategy experiments)."""
    rng = np.random.default_rng(seed)
    base = np.zeros((size, size), dtype=np.float64)
    yy, xx = np.mgrid[0:size, 0:size] / size

    # smooth illumination gradient
    gx, gy = rng.uniform(-0.4, 0.4, size=2)
    base += 0.45 + gx * (xx - 0.5) + gy * (yy - 0.5)

    # soft Gaussian blobs
    for _ in range(rng.integers(3, 7)):
        cx, cy = rng.uniform(0, 1, size=2)
        amp = rng.uniform(-0.35, 0.4)
        width = rng.uniform(0.05, 0.25)
        base += amp * np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * width**2))

    # sharp rectangles (edges exercise the ringing-prone path)
    for _ in range(rng.integers(2, 5)):
        r0, c0 = rng.integers(0, size - 16, size=2)
        rh, cw = rng.integers(8, size // 3, size=2)
        base[r0 : r0 + rh, c0 : c0 + cw] += rng.uniform(-0.3, 0.3)

    # guaranteed dark strip
    strip = rng.integers(0, size - size // 5)
    base[strip : strip + size // 6] *= rng.uniform(0.05, 0.2)

    base = cv2.GaussianBlur(base, (0, 0), sigmaX=0.8)
    base = np.clip(base, 0.0, 1.0)

    planes = np.stack([np.clip(base * rng.uniform(0.85, 1.0), 0.0, 1.0) for _ in range(3)])
    return ImagePlanar(planes.astype(np.float32))
