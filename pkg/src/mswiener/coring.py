"""Refinement of the per-block coring transfer tensor.

All block transfer functions at one scale are collated into a 4D tensor
(grid rows, grid cols, freq, freq). Stage 1 convolves within each block over
the two frequency axes, stage 2 convolves across the block grid per
frequency; each stage is residual, so a zero-weight bundle is an exact
identity. Output is clamped to [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DataError
from .weights import (
    KIND_BN_BETA,
    KIND_BN_GAMMA,
    KIND_BN_MEAN,
    KIND_BN_VAR,
    KIND_CONV_BIAS,
    KIND_CONV_WEIGHT,
    ROLE_CORING,
    WeightBundle,
    validate_records,
)
from .sigma import BN_EPS


@dataclass(frozen=True)
class CoringNetDef:
    stage1_layers: int = 5  # intra-block convs, over the frequency axes
    stage2_layers: int = 4  # inter-block convs, over the grid axes
    channels: int = 20
    kernel: int = 3

    def stage_io(self, layers: int) -> list:
        sizes = [1] + [self.channels] * (layers - 1) + [1]
        return [(sizes[i], sizes[i + 1], i < layers - 1) for i in range(layers)]


def param_count_coring(net: CoringNetDef = CoringNetDef()) -> int:
    k2 = net.kernel * net.kernel
    total = 0
    for layers in (net.stage1_layers, net.stage2_layers):
        for cin, cout, has_bn in net.stage_io(layers):
            total += cin * cout * k2 + cout
            if has_bn:
                total += 2 * cout
    return total


def expected_coring_records(net: CoringNetDef = CoringNetDef()) -> list:
    k = net.kernel
    out = []
    for layers in (net.stage1_layers, net.stage2_layers):
        for cin, cout, has_bn in net.stage_io(layers):
            out.append((KIND_CONV_WEIGHT, (cout, cin, k, k)))
            out.append((KIND_CONV_BIAS, (cout,)))
            if has_bn:
                out.append((KIND_BN_GAMMA, (cout,)))
                out.append((KIND_BN_BETA, (cout,)))
                out.append((KIND_BN_MEAN, (cout,)))
                out.append((KIND_BN_VAR, (cout,)))
    return out


def collate_h(blocks: dict, grid_extents: tuple[int, int]) -> np.ndarray:
    """Assemble {(row, col): h} into a dense (rows, cols, N, N) tensor."""
    rows, cols = grid_extents
    first = next(iter(blocks.values()), None)
    if first is None:
        raise DataError("no blocks to collate")
    n = first.shape[0]
    tensor = np.empty((rows, cols, n, n), dtype=np.float64)
    for r in range(rows):
        for c in range(cols):
            if (r, c) not in blocks:
                raise DataError(f"missing block at grid position ({r}, {c})")
            h = blocks[(r, c)]
            if h.shape != (n, n):
                raise DataError(f"block ({r}, {c}) has shape {h.shape}, expected {(n, n)}")
            tensor[r, c] = h
    return tensor


def scatter_h(tensor: np.ndarray) -> dict:
    """Inverse of collate_h."""
    rows, cols = tensor.shape[:2]
    return {(r, c): tensor[r, c].copy() for r in range(rows) for c in range(cols)}


def _fold_stage(records: list, io: list) -> list:
    layers = []
    idx = 0
    for _, _, has_bn in io:
        w = records[idx][1].astype(np.float64)
        b = records[idx + 1][1].astype(np.float64)
        idx += 2
        if has_bn:
            gamma = records[idx][1].astype(np.float64)
            beta = records[idx + 1][1].astype(np.float64)
            mean = records[idx + 2][1].astype(np.float64)
            var = records[idx + 3][1].astype(np.float64)
            idx += 4
            scale = gamma / np.sqrt(var + BN_EPS)
            w = w * scale[:, None, None, None]
            b = (b - mean) * scale + beta
        layers.append((w, b))
    return layers, idx


def _conv_stack(x: np.ndarray, layers: list) -> np.ndarray:
    """Batched zero-padded 3x3 conv stack over (B, C, H, W)."""
    for i, (w, b) in enumerate(layers):
        xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
        view = sliding_window_view(xp, (3, 3), axis=(2, 3))
        x = np.einsum("ockl,bchwkl->bohw", w, view, optimize=True) + b[None, :, None, None]
        if i < len(layers) - 1:
            x = np.maximum(x, 0.0)
    return x


def refine_h(tensor: np.ndarray, bundle: WeightBundle, net: CoringNetDef = CoringNetDef()) -> np.ndarray:
    """Run the two-stage residual refinement over a collated coring tensor."""
    if bundle.role != ROLE_CORING:
        raise DataError(f"bundle role {bundle.role} is not a coring network")
    validate_records(bundle, expected_coring_records(net), "coring bundle")
    io1 = net.stage_io(net.stage1_layers)
    io2 = net.stage_io(net.stage2_layers)
    stage1, used = _fold_stage(bundle.records, io1)
    stage2, _ = _fold_stage(bundle.records[used:], io2)

    rows, cols, n, _ = tensor.shape
    x = tensor.astype(np.float64)

    # stage 1: each block's (N, N) transfer slice is a 1-channel image
    intra = x.reshape(rows * cols, 1, n, n)
    intra = intra + _conv_stack(intra, stage1)
    x = intra.reshape(rows, cols, n, n)

    # stage 2: each frequency's (rows, cols) slice is a 1-channel image
    inter = x.transpose(2, 3, 0, 1).reshape(n * n, 1, rows, cols)
    inter = inter + _conv_stack(inter, stage2)
    x = inter.reshape(n, n, rows, cols).transpose(2, 3, 0, 1)

    return np.clip(x, 0.0, 1.0)


def make_refiner(bundle: WeightBundle, net: CoringNetDef = CoringNetDef()):
    """Callable suitable as WienerBlockFilter.coring_refiner."""
    return lambda tensor: refine_h(tensor, bundle, net)
