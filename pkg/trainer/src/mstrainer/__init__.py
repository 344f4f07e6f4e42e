"""Training side of the multi-scale Wiener denoiser."""

from .bundles import (
    Bundle,
    BundleError,
    ROLE_CORING,
    ROLE_SIGMA,
    read_bundle,
    write_bundle,
)
from .data import DataError, PairDataset, random_crop
from .diffwiener import (
    DiffPlan,
    gaussian_window,
    make_diff_plan,
    psnr,
    soft_core,
    wiener_denoise,
)
from .models import BN_EPS, CoringNet, SigmaNet
from .train import (
    TrainConfig,
    cosine_lr,
    evaluate_through_pipeline,
    finetune_end_to_end,
    train_coring_net,
    train_std_net,
)

__all__ = [
    "BN_EPS", "Bundle", "BundleError", "CoringNet", "DataError", "DiffPlan",
    "PairDataset", "ROLE_CORING", "ROLE_SIGMA", "SigmaNet", "TrainConfig",
    "cosine_lr", "evaluate_through_pipeline", "finetune_end_to_end",
    "gaussian_window", "make_diff_plan", "psnr", "random_crop", "read_bundle",
    "soft_core", "train_coring_net", "train_std_net", "wiener_denoise",
    "write_bundle",
]
