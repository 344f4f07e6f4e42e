"""Torch modules mirroring the inference engine's network structures.

SigmaNet: conv3x3(zero pad) / BatchNorm / ReLU stack with a final conv and a
softplus head, predicting a per-pixel noise-STD map. BN sits on every layer
but the last, matching the engine's folded-BN inference, with the same
eps = 1e-5 so exported running statistics reproduce the engine bit-for-bit.

CoringNet: two residual stages over a collated (rows, cols, N, N) transfer
tensor — stage 1 convolves each block over the two frequency axes, stage 2
convolves each frequency over the block grid. Zero conv weights make both
residual branches vanish, so a freshly zero-initialized net is an identity.
"""

from __future__ import annotations

import torch
from torch import nn

from .bundles import (
    KIND_BN_BETA,
    KIND_BN_GAMMA,
    KIND_BN_MEAN,
    KIND_BN_VAR,
    KIND_CONV_BIAS,
    KIND_CONV_WEIGHT,
    ROLE_CORING,
    ROLE_SIGMA,
    Bundle,
    BundleError,
)

BN_EPS = 1e-5

SIGMA_DEPTHS = (2, 4, 6)
SIGMA_CHANNELS = (16, 32, 64)


class SigmaNet(nn.Module):
    def __init__(self, depth: int, channels: int, in_channels: int = 3):
        super().__init__()
        if depth not in SIGMA_DEPTHS or channels not in SIGMA_CHANNELS:
            raise ValueError(
                f"grid point ({depth}, {channels}) outside "
                f"{SIGMA_DEPTHS} x {SIGMA_CHANNELS}"
            )
        self.depth = depth
        self.channels = channels
        sizes = [in_channels] + [channels] * (depth - 1) + [in_channels]
        self.convs = nn.ModuleList(
            nn.Conv2d(sizes[i], sizes[i + 1], 3, padding=1) for i in range(depth)
        )
        self.bns = nn.ModuleList(
            nn.BatchNorm2d(sizes[i + 1], eps=BN_EPS) for i in range(depth - 1)
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        for i, conv in enumerate(self.convs):
            x = conv(x)
            if i < len(self.convs) - 1:
                x = torch.relu(self.bns[i](x))
        return torch.nn.functional.softplus(x)

    def export(self) -> Bundle:
        records = []
        for i, conv in enumerate(self.convs):
            records.append((KIND_CONV_WEIGHT, conv.weight.detach().cpu().numpy()))
            records.append((KIND_CONV_BIAS, conv.bias.detach().cpu().numpy()))
            if i < len(self.convs) - 1:
                bn = self.bns[i]
                records.append((KIND_BN_GAMMA, bn.weight.detach().cpu().numpy()))
                records.append((KIND_BN_BETA, bn.bias.detach().cpu().numpy()))
                records.append((KIND_BN_MEAN, bn.running_mean.detach().cpu().numpy()))
                records.append((KIND_BN_VAR, bn.running_var.detach().cpu().numpy()))
        return Bundle(ROLE_SIGMA, self.depth, self.channels, records)

    def load_bundle(self, bundle: Bundle) -> "SigmaNet":
        if bundle.role != ROLE_SIGMA:
            raise BundleError(f"bundle role {bundle.role} is not a sigma network")
        it = iter(bundle.records)
        with torch.no_grad():
            for i, conv in enumerate(self.convs):
                _copy(conv.weight, next(it), KIND_CONV_WEIGHT)
                _copy(conv.bias, next(it), KIND_CONV_BIAS)
                if i < len(self.convs) - 1:
                    bn = self.bns[i]
                    _copy(bn.weight, next(it), KIND_BN_GAMMA)
                    _copy(bn.bias, next(it), KIND_BN_BETA)
                    _copy(bn.running_mean, next(it), KIND_BN_MEAN)
                    _copy(bn.running_var, next(it), KIND_BN_VAR)
        return self


class _ResidualStage(nn.Module):
    """1-channel-in/out conv stack applied as a residual branch."""

    def __init__(self, layers: int, channels: int):
        super().__init__()
        sizes = [1] + [channels] * (layers - 1) + [1]
        self.convs = nn.ModuleList(
            nn.Conv2d(sizes[i], sizes[i + 1], 3, padding=1) for i in range(layers)
        )
        self.bns = nn.ModuleList(
            nn.BatchNorm2d(sizes[i + 1], eps=BN_EPS) for i in range(layers - 1)
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        y = x
        for i, conv in enumerate(self.convs):
            y = conv(y)
            if i < len(self.convs) - 1:
                y = torch.relu(self.bns[i](y))
        return x + y

    def zero_init(self):
        with torch.no_grad():
            for conv in self.convs:
                conv.weight.zero_()
                conv.bias.zero_()

    def records(self):
        out = []
        for i, conv in enumerate(self.convs):
            out.append((KIND_CONV_WEIGHT, conv.weight.detach().cpu().numpy()))
            out.append((KIND_CONV_BIAS, conv.bias.detach().cpu().numpy()))
            if i < len(self.convs) - 1:
                bn = self.bns[i]
                out.append((KIND_BN_GAMMA, bn.weight.detach().cpu().numpy()))
                out.append((KIND_BN_BETA, bn.bias.detach().cpu().numpy()))
                out.append((KIND_BN_MEAN, bn.running_mean.detach().cpu().numpy()))
                out.append((KIND_BN_VAR, bn.running_var.detach().cpu().numpy()))
        return out

    def load_records(self, it):
        with torch.no_grad():
            for i, conv in enumerate(self.convs):
                _copy(conv.weight, next(it), KIND_CONV_WEIGHT)
                _copy(conv.bias, next(it), KIND_CONV_BIAS)
                if i < len(self.convs) - 1:
                    bn = self.bns[i]
                    _copy(bn.weight, next(it), KIND_BN_GAMMA)
                    _copy(bn.bias, next(it), KIND_BN_BETA)
                    _copy(bn.running_mean, next(it), KIND_BN_MEAN)
                    _copy(bn.running_var, next(it), KIND_BN_VAR)


class CoringNet(nn.Module):
    def __init__(self, stage1_layers: int = 5, stage2_layers: int = 4, channels: int = 20):
        super().__init__()
        self.stage1 = _ResidualStage(stage1_layers, channels)
        self.stage2 = _ResidualStage(stage2_layers, channels)
        self.channels = channels
        self.stage1.zero_init()
        self.stage2.zero_init()

    def forward(self, tensor: torch.Tensor) -> torch.Tensor:
        """(rows, cols, N, N) transfer tensor -> refined tensor in [0, 1]."""
        rows, cols, n, _ = tensor.shape
        x = tensor.reshape(rows * cols, 1, n, n)
        x = self.stage1(x).reshape(rows, cols, n, n)
        x = x.permute(2, 3, 0, 1).reshape(n * n, 1, rows, cols)
        x = self.stage2(x).reshape(n, n, rows, cols).permute(2, 3, 0, 1)
        return torch.clamp(x, 0.0, 1.0)

    def export(self) -> Bundle:
        depth = len(self.stage1.convs) + len(self.stage2.convs)
        return Bundle(ROLE_CORING, depth, self.channels,
                      self.stage1.records() + self.stage2.records())

    def load_bundle(self, bundle: Bundle) -> "CoringNet":
        if bundle.role != ROLE_CORING:
            raise BundleError(f"bundle role {bundle.role} is not a coring network")
        it = iter(bundle.records)
        self.stage1.load_records(it)
        self.stage2.load_records(it)
        return self


def _copy(param: torch.Tensor, record, expected_kind: int):
    kind, arr = record
    if kind != expected_kind:
        raise BundleError(f"record kind {kind} where {expected_kind} was expected")
    tensor = torch.from_numpy(arr.copy())
    if tuple(tensor.shape) != tuple(param.shape):
        raise BundleError(f"shape {tuple(tensor.shape)} does not match {tuple(param.shape)}")
    param.copy_(tensor.to(param.dtype))
