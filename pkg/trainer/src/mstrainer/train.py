"""Training loops: sigma-map regression, optional end-to-end fine-tuning of
the sigma net through the differentiable Wiener path, and optional coring-
network training with a frozen sigma predictor.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

import torch

from .bundles import Bundle
from .data import PairDataset, random_crop
from .diffwiener import psnr, wiener_denoise
from .models import CoringNet, SigmaNet


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    depth: int = 4
    channels: int = 16
    epochs: int = 4000
    batch_size: int = 24
    patch: int = 128
    lr_max: float = 1e-3
    lr_min: float = 1e-5
    lr_period: int = 300  # warm-restart period of the cosine schedule
    seed: int = 0
    log: list = field(default_factory=list)


def cosine_lr(config: TrainConfig, epoch: int) -> float:
    """Cosine annealing from lr_max to lr_min with warm restarts every
    lr_period epochs (the restart reading of "decays ... every 300 epochs")."""
    phase = (epoch % config.lr_period) / config.lr_period
    return config.lr_min + 0.5 * (config.lr_max - config.lr_min) * (1 + math.cos(math.pi * phase))


def _epoch_batches(dataset, config: TrainConfig, rng: torch.Generator):
    order = torch.randperm(len(dataset), generator=rng).tolist()
    for start in range(0, len(order), config.batch_size):
        idx = order[start : start + config.batch_size]
        noisy, sigma = [], []
        for i in idx:
            n, s, _ = dataset[i]
            n, s = random_crop([n, s], min(config.patch, n.shape[-1], n.shape[-2]), rng)
            noisy.append(n)
            sigma.append(s)
        yield torch.stack(noisy), torch.stack(sigma)


def train_std_net(config: TrainConfig, dataset: PairDataset) -> Bundle:
    """L1 regression of the per-pixel noise-STD map; returns the best-loss
    weights as a bundle. A NaN loss aborts with the last good checkpoint."""
    torch.manual_seed(config.seed)
    rng = torch.Generator().manual_seed(config.seed)
    model = SigmaNet(config.depth, config.channels)
    optim = torch.optim.Adam(model.parameters(), lr=config.lr_max)
    last_good = copy.deepcopy(model.state_dict())

    for epoch in range(config.epochs):
        lr = cosine_lr(config, epoch)
        for group in optim.param_groups:
            group["lr"] = lr
        model.train()
        total, count = 0.0, 0
        for noisy, sigma in _epoch_batches(dataset, config, rng):
            optim.zero_grad()
            loss = torch.nn.functional.l1_loss(model(noisy), sigma)
            if not torch.isfinite(loss):
                model.load_state_dict(last_good)
                config.log.append({"epoch": epoch, "event": "nan-abort"})
                return model.eval().export()
            loss.backward()
            optim.step()
            total += float(loss.detach()) * noisy.shape[0]
            count += noisy.shape[0]
        last_good = copy.deepcopy(model.state_dict())
        config.log.append({"epoch": epoch, "l1": total / max(count, 1), "lr": lr})

    return model.eval().export()


def finetune_end_to_end(
    bundle: Bundle,
    dataset: PairDataset,
    steps: int = 50,
    lr: float = 1e-4,
    block_size: int = 16,
    stride_denominator: int = 2,
    temperature: float = 100.0,
    seed: int = 0,
) -> Bundle:
    """Optional stage 2: L1 loss between the differentiable Wiener output and
    the clean image, backpropagated into the sigma net. Divergence (non-finite
    loss or > 3x the initial loss) reverts to the input weights."""
    torch.manual_seed(seed)
    model = SigmaNet(bundle.depth, bundle.channels).load_bundle(bundle)
    # eval mode: BN uses the bundle's running statistics, exactly as the
    # inference engine will, and the statistics themselves stay frozen
    model.eval()
    optim = torch.optim.Adam(model.parameters(), lr=lr)
    initial_loss = None

    for step in range(steps):
        noisy, _, clean = dataset[step % len(dataset)]
        optim.zero_grad()
        sigma_map = model(noisy[None].float())[0]
        out = wiener_denoise(
            noisy.double(), sigma_map.double(),
            block_size=block_size, stride_denominator=stride_denominator,
            temperature=temperature,
        )
        loss = torch.nn.functional.l1_loss(out, clean.double())
        if initial_loss is None:
            initial_loss = float(loss.detach())
        if not torch.isfinite(loss) or float(loss.detach()) > 3.0 * initial_loss:
            return bundle  # diverged: revert to the input weights
        if lr > 0.0:
            loss.backward()
            optim.step()
    return model.eval().export()


def train_coring_net(
    std_bundle: Bundle,
    dataset: PairDataset,
    steps: int = 200,
    lr: float = 1e-4,
    block_size: int = 16,
    stride_denominator: int = 2,
    temperature: float = 100.0,
    seed: int = 0,
) -> Bundle:
    """Optional coring-network training with the sigma predictor frozen.

    The net is residual and zero-initialized, so step 0 is an exact identity;
    training minimizes L1 between the refined-coring Wiener output and the
    clean image. Divergence reverts to the best checkpoint seen."""
    torch.manual_seed(seed)
    sigma_net = SigmaNet(std_bundle.depth, std_bundle.channels).load_bundle(std_bundle)
    sigma_net.eval()
    for p in sigma_net.parameters():
        p.requires_grad_(False)

    coring = CoringNet().double()
    optim = torch.optim.Adam(coring.parameters(), lr=lr)
    best = copy.deepcopy(coring.state_dict())
    best_loss = math.inf

    for step in range(steps):
        noisy, _, clean = dataset[step % len(dataset)]
        with torch.no_grad():
            sigma_map = sigma_net(noisy[None].float())[0]
        optim.zero_grad()
        out = wiener_denoise(
            noisy.double(), sigma_map.double(),
            block_size=block_size, stride_denominator=stride_denominator,
            temperature=temperature, coring_net=coring,
        )
        loss = torch.nn.functional.l1_loss(out, clean.double())
        if not torch.isfinite(loss):
            coring.load_state_dict(best)
            break
        if float(loss.detach()) < best_loss:
            best_loss = float(loss.detach())
            best = copy.deepcopy(coring.state_dict())
        loss.backward()
        optim.step()

    coring.load_state_dict(best)
    return coring.eval().export()


def evaluate_through_pipeline(bundle: Bundle, dataset: PairDataset, **kwargs) -> float:
    """Mean PSNR of the differentiable pipeline (hard clamp) on a dataset."""
    model = SigmaNet(bundle.depth, bundle.channels).load_bundle(bundle).eval()
    values = []
    with torch.no_grad():
        for i in range(len(dataset)):
            noisy, _, clean = dataset[i]
            sigma_map = model(noisy[None].float())[0]
            out = wiener_denoise(
                noisy.double(), sigma_map.double(), temperature=None, **kwargs
            )
            values.append(psnr(out, clean.double()))
    return float(sum(values) / len(values))
