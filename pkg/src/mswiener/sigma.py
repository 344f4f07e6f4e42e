"""Noise-STD estimation: tiny-CNN inference and a weight-free statistical
fallback based on the median absolute deviation of a Laplacian response.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import convolve2d

from .errors import ConfigError, DataError, NumericError
from .image import ImagePlanar
from .weights import (
    KIND_BN_BETA,
    KIND_BN_GAMMA,
    KIND_BN_MEAN,
    KIND_BN_VAR,
    KIND_CONV_BIAS,
    KIND_CONV_WEIGHT,
    ROLE_SIGMA,
    WeightBundle,
    validate_records,
)

NETWORK_DEPTHS = (2, 4, 6)
NETWORK_CHANNELS = (16, 32, 64)

BN_EPS = 1e-5  # shared with the trainer so folded weights agree bit-for-bit

# 3x3 Laplacian used by the statistical estimator; for unit-variance white
# noise the response variance is the kernel's squared norm.
LAPLACIAN = np.array([[1.0, -2.0, 1.0], [-2.0, 4.0, -2.0], [1.0, -2.0, 1.0]])
LAPLACIAN_NORM = float(np.sqrt(np.sum(LAPLACIAN**2)))  # = 6
MAD_TO_STD = 1.4826


@dataclass(frozen=True)
class SigmaMap:
    """Per-pixel, per-channel noise STD in normalized intensity units."""

    values: np.ndarray  # (C, H, W), finite, >= 0

    def __post_init__(self):
        if self.values.ndim != 3:
            raise DataError(f"sigma map must be (C, H, W), got {self.values.shape}")
        if not np.all(np.isfinite(self.values)) or np.any(self.values < 0):
            raise NumericError("sigma map contains negative or non-finite values")

    def spatial_mean(self) -> float:
        return float(np.mean(self.values))

    def channel_means(self) -> np.ndarray:
        return self.values.mean(axis=(1, 2))


@dataclass(frozen=True)
class NetworkDef:
    """Structure of one sigma-prediction CNN from the depth x width grid."""

    depth: int
    channels: int
    in_channels: int = 3
    out_channels: int = 3
    kernel: int = 3

    def __post_init__(self):
        if self.depth not in NETWORK_DEPTHS:
            raise ConfigError(f"depth must be one of {NETWORK_DEPTHS}, got {self.depth}")
        if self.channels not in NETWORK_CHANNELS:
            raise ConfigError(f"channels must be one of {NETWORK_CHANNELS}, got {self.channels}")

    def layer_io(self) -> list:
        """(in, out, has_bn) per conv layer; BN on every layer but the last."""
        sizes = [self.in_channels] + [self.channels] * (self.depth - 1) + [self.out_channels]
        return [
            (sizes[i], sizes[i + 1], i < self.depth - 1) for i in range(self.depth)
        ]


def param_count(net: NetworkDef) -> int:
    """Trainable parameters: conv weights+biases plus BN gamma/beta."""
    k2 = net.kernel * net.kernel
    total = 0
    for cin, cout, has_bn in net.layer_io():
        total += cin * cout * k2 + cout
        if has_bn:
            total += 2 * cout
    return total


def expected_records(net: NetworkDef) -> list:
    """Record (kind, shape) sequence a sigma bundle must carry."""
    k = net.kernel
    out = []
    for cin, cout, has_bn in net.layer_io():
        out.append((KIND_CONV_WEIGHT, (cout, cin, k, k)))
        out.append((KIND_CONV_BIAS, (cout,)))
        if has_bn:
            out.append((KIND_BN_GAMMA, (cout,)))
            out.append((KIND_BN_BETA, (cout,)))
            out.append((KIND_BN_MEAN, (cout,)))
            out.append((KIND_BN_VAR, (cout,)))
    return out


def bundle_network_def(bundle: WeightBundle) -> NetworkDef:
    if bundle.role != ROLE_SIGMA:
        raise DataError(f"bundle role {bundle.role} is not a sigma network")
    net = NetworkDef(depth=bundle.depth, channels=bundle.channels)
    validate_records(bundle, expected_records(net), "sigma bundle")
    return net


def fold_bn(bundle: WeightBundle, net: NetworkDef) -> list:
    """Absorb BN scale/shift into conv weights; returns [(weight, bias), ...]."""
    layers = []
    idx = 0
    for _, _, has_bn in net.layer_io():
        w = bundle.records[idx][1].astype(np.float64)
        b = bundle.records[idx + 1][1].astype(np.float64)
        idx += 2
        if has_bn:
            gamma = bundle.records[idx][1].astype(np.float64)
            beta = bundle.records[idx + 1][1].astype(np.float64)
            mean = bundle.records[idx + 2][1].astype(np.float64)
            var = bundle.records[idx + 3][1].astype(np.float64)
            idx += 4
            scale = gamma / np.sqrt(var + BN_EPS)
            w = w * scale[:, None, None, None]
            b = (b - mean) * scale + beta
        layers.append((w, b))
    return layers


def conv3x3(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Zero-padded 3x3 convolution, (Cin, H, W) -> (Cout, H, W)."""
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    view = sliding_window_view(xp, (3, 3), axis=(1, 2))
    return np.einsum("ockl,chwkl->ohw", weight, view, optimize=True) + bias[:, None, None]


def softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def infer_sigma_map(image: ImagePlanar, bundle: WeightBundle) -> SigmaMap:
    """Forward pass of a sigma CNN: conv/folded-BN/ReLU stack, softplus head."""
    net = bundle_network_def(bundle)
    layers = fold_bn(bundle, net)
    x = image.data.astype(np.float64)
    if x.shape[0] != net.in_channels:
        raise DataError(f"network expects {net.in_channels} channels, image has {x.shape[0]}")
    for i, (w, b) in enumerate(layers):
        x = conv3x3(x, w, b)
        if not np.all(np.isfinite(x)):
            raise NumericError(f"non-finite activation after conv layer {i}")
        if i < len(layers) - 1:
            x = np.maximum(x, 0.0)
    return SigmaMap(softplus(x))


def _mad_sigma(responses: np.ndarray) -> float:
    return MAD_TO_STD * float(np.median(np.abs(responses))) / LAPLACIAN_NORM


def _laplacian_response(plane: np.ndarray) -> np.ndarray:
    return convolve2d(plane.astype(np.float64), LAPLACIAN, mode="valid")


def estimate_sigma_statistical(image: ImagePlanar, scope: str, block_size: int = 32):
    """Robust Laplacian-MAD noise STD estimate.

    scope "global" -> float, "per_channel" -> (C,) array,
    "per_block" -> piecewise-constant SigmaMap built from block neighborhoods.
    """
    c, h, w = image.data.shape
    if h < 8 or w < 8:
        raise DataError(f"image {h}x{w} too small for noise estimation (need >= 8x8)")
    if scope == "global":
        pooled = np.concatenate([_laplacian_response(p).ravel() for p in image.data])
        return _mad_sigma(pooled)
    if scope == "per_channel":
        return np.array([_mad_sigma(_laplacian_response(p)) for p in image.data])
    if scope != "per_block":
        raise ConfigError(f"unknown sigma scope: {scope}")
    if block_size > min(h, w):
        raise DataError(f"block_size {block_size} exceeds image extent {h}x{w}")
    values = np.empty((c, h, w), dtype=np.float64)
    for r0 in range(0, h, block_size):
        r_lo = min(r0, h - 8)
        r_hi = min(r0 + block_size, h)
        for c0 in range(0, w, block_size):
            c_lo = min(c0, w - 8)
            c_hi = min(c0 + block_size, w)
            for ch in range(c):
                tile = image.data[ch, r_lo:r_hi, c_lo:c_hi]
                values[ch, r0:r_hi, c0:c_hi] = _mad_sigma(_laplacian_response(tile))
    return SigmaMap(values)
