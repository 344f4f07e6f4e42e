"""Dataset loading for sigma-map regression and end-to-end fine-tuning.

Consumes the benchmark datasets the engine's `make-dataset` verb writes:
a directory with clean/, noisy/ and sigma/ PNG subfolders plus a
manifest.jsonl whose rows carry the relative paths and the 16-bit sigma-PNG
scale factor.
"""

from __future__ import annotations

import json
from pathlib import Path

import cv2
import numpy as np
import torch


class DataError(ValueError):
    pass


def _load_png(path: Path) -> np.ndarray:
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise DataError(f"cannot read PNG {path}")
    peak = 65535.0 if raw.dtype == np.uint16 else 255.0
    data = raw.astype(np.float64) / peak
    if data.ndim == 2:
        data = np.stack([data] * 3, axis=-1)
    if data.shape[-1] == 4:
        data = data[..., :3]
    return np.ascontiguousarray(data[..., ::-1].transpose(2, 0, 1))  # BGR -> RGB, planar


class PairDataset(torch.utils.data.Dataset):
    """(noisy, sigma_map, clean) triples as float32 tensors."""

    def __init__(self, dataset_dir, indices=None):
        self.root = Path(dataset_dir)
        manifest = self.root / "manifest.jsonl"
        if not manifest.is_file():
            raise DataError(f"no manifest.jsonl in {self.root}")
        entries = [json.loads(line) for line in manifest.read_text().splitlines() if line.strip()]
        if indices is not None:
            entries = [entries[i] for i in indices]
        if not entries:
            raise DataError(f"dataset {self.root} is empty")
        self.entries = entries

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, i):
        entry = self.entries[i]
        noisy = _load_png(self.root / entry["noisy"])
        clean = _load_png(self.root / entry["clean"])
        sigma = _load_png(self.root / entry["sigma_map"]) * float(entry["sigma_png_scale"])
        return (
            torch.from_numpy(noisy).float(),
            torch.from_numpy(sigma).float(),
            torch.from_numpy(clean).float(),
        )


def random_crop(tensors, patch: int, rng: torch.Generator):
    """Crop the same random patch window out of each aligned tensor."""
    _, h, w = tensors[0].shape
    if h < patch or w < patch:
        raise DataError(f"image {h}x{w} smaller than the {patch}x{patch} patch")
    r = int(torch.randint(0, h - patch + 1, (1,), generator=rng))
    c = int(torch.randint(0, w - patch + 1, (1,), generator=rng))
    return [t[:, r : r + patch, c : c + patch] for t in tensors]
