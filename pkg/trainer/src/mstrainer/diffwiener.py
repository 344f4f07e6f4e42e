"""Differentiable re-implementation of the single-scale Wiener pipeline.

Mirrors the inference engine's math — Gaussian window, reflect padding,
per-block DC removal, FFT-domain clamped spectral subtraction, windowed DC
restore, squared-window-normalized overlap-add — but in torch so gradients
flow end to end. The hard max(P_yy - P_nn, 0) clamp is replaced by a
softplus with a temperature (default 100) during backprop-capable runs;
temperature None selects the hard clamp, which matches the engine exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch

PSD_EPS = 1e-20


def gaussian_window(size: int, alpha: float = 0.3, dtype=torch.float64) -> torch.Tensor:
    """Separable Gaussian taper over pixel-center coordinates in [-1, 1]."""
    u = (2.0 * torch.arange(size, dtype=dtype) + 1.0 - size) / size
    g = torch.exp(-(u**2) / (2.0 * alpha**2))
    return torch.outer(g, g)


@dataclass(frozen=True)
class DiffPlan:
    block_size: int
    stride: int
    pad: int
    pad_bottom: int
    pad_right: int
    grid_rows: int
    grid_cols: int


def make_diff_plan(extent: tuple[int, int], block_size: int, stride_denominator: int) -> DiffPlan:
    """Origin lattice with a top/left lead-in of (N - stride), matching the
    engine: every original pixel then sees the full set of window phases."""
    height, width = extent
    stride = max(1, block_size // stride_denominator)
    pad = block_size - stride

    def axis(extent_1d):
        last = stride * ((pad + extent_1d - 1) // stride)
        count = last // stride + 1
        pad_far = last + block_size - pad - extent_1d
        return count, pad_far

    grid_rows, pad_bottom = axis(height)
    grid_cols, pad_right = axis(width)
    return DiffPlan(block_size, stride, pad, pad_bottom, pad_right, grid_rows, grid_cols)


def soft_core(p_yy: torch.Tensor, p_nn: torch.Tensor, temperature: float | None) -> torch.Tensor:
    """Shrinkage gain h; softplus-smoothed clamp when a temperature is given."""
    if temperature is None:
        p_xx = torch.clamp(p_yy - p_nn, min=0.0)
    else:
        p_xx = torch.nn.functional.softplus(p_yy - p_nn, beta=temperature)
    return torch.where(p_yy > PSD_EPS, p_xx / torch.clamp(p_yy, min=PSD_EPS), torch.zeros_like(p_yy))


def wiener_denoise(
    noisy: torch.Tensor,
    sigma_map: torch.Tensor,
    block_size: int = 16,
    stride_denominator: int = 2,
    alpha: float = 0.3,
    correction: float = 1.0,
    temperature: float | None = 100.0,
    coring_net=None,
) -> torch.Tensor:
    """Denoise one (C, H, W) image with a per-pixel noise-STD map.

    Per block, the noise PSD is the window-weighted mean noise variance
    inside the block times ||w||^2; the DC estimate is the median (lower of
    the two central values, as in the engine).
    """
    if noisy.ndim != 3:
        raise ValueError(f"expected (C, H, W) input, got shape {tuple(noisy.shape)}")
    c, height, width = noisy.shape
    dtype = noisy.dtype
    plan = make_diff_plan((height, width), block_size, stride_denominator)
    n, stride = plan.block_size, plan.stride
    window = gaussian_window(n, alpha, dtype=dtype).to(noisy.device)
    norm_sq = torch.sum(window**2)

    def pad(x):
        return torch.nn.functional.pad(
            x[None], (plan.pad, plan.pad_right, plan.pad, plan.pad_bottom), mode="reflect"
        )[0]

    padded = pad(noisy)
    padded_sigma = pad(sigma_map.to(dtype))

    def blocks_of(x):  # (C, Hp, Wp) -> (C, B, N, N)
        u = x.unfold(1, n, stride).unfold(2, n, stride)
        return u.reshape(c, plan.grid_rows * plan.grid_cols, n, n)

    y = blocks_of(padded)
    sig = blocks_of(padded_sigma)

    # lower median matches the engine's DC estimator; for even element counts
    # torch.median already returns the lower of the two central values
    dc = torch.median(y.reshape(c, -1, n * n), dim=-1).values[..., None, None]
    y_w = (y - dc) * window

    spectrum = torch.fft.fft2(y_w)
    p_yy = spectrum.real**2 + spectrum.imag**2
    block_var = torch.sum(sig**2 * window**2, dim=(-2, -1)) / norm_sq
    p_nn = (correction**2 * block_var)[..., None, None] * norm_sq
    h = soft_core(p_yy, p_nn, temperature)

    if coring_net is not None:
        refined = []
        for ch in range(c):
            tensor = h[ch].reshape(plan.grid_rows, plan.grid_cols, n, n)
            refined.append(coring_net(tensor).reshape(-1, n, n))
        h = torch.stack(refined)

    x_blocks = torch.fft.ifft2(spectrum * h).real + dc * window

    # squared-window-normalized overlap-add via fold
    weighted = (x_blocks * window).permute(0, 2, 3, 1).reshape(c * n * n, -1)
    out_size = (plan.pad + height + plan.pad_bottom, plan.pad + width + plan.pad_right)
    folded = torch.nn.functional.fold(
        weighted[None], output_size=out_size, kernel_size=n, stride=stride
    )[0]
    ones = torch.ones(1, plan.grid_rows * plan.grid_cols, n, n, dtype=dtype, device=noisy.device)
    w_mask = torch.nn.functional.fold(
        ((ones * window**2).permute(0, 2, 3, 1).reshape(n * n, -1))[None],
        output_size=out_size, kernel_size=n, stride=stride,
    )[0, 0]
    out = folded / w_mask
    return out[:, plan.pad : plan.pad + height, plan.pad : plan.pad + width]


def psnr(a: torch.Tensor, b: torch.Tensor, peak: float = 1.0) -> float:
    mse = float(torch.mean((a.double() - b.double()) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak**2 / mse)
