"""Blind noise-level estimation and why per-block maps help.

Corrupts an image with signal-dependent noise (variance grows with
intensity), then compares the statistical Laplacian-MAD estimator at its
three scopes against the analytic ground truth, and shows the downstream
PSNR difference between a single global sigma and a per-block map.
"""

from dataclasses import replace

import numpy as np

import mswiener as mw
from mswiener.pipeline import denoise_image, preset

clean = mw.make_test_image(seed=3)
params = mw.NoiseParams(sigma_s=0.14, sigma_c=0.02, seed=9)
noisy = mw.add_noise(clean, params, clamp=True)
gt = mw.ground_truth_sigma_map(clean, params)

print(f"ground-truth sigma: mean {gt.spatial_mean():.4f}, "
      f"range [{gt.values.min():.4f}, {gt.values.max():.4f}]")
print()

g = mw.estimate_sigma_statistical(noisy, "global")
pc = mw.estimate_sigma_statistical(noisy, "per_channel")
pb = mw.estimate_sigma_statistical(noisy, "per_block", block_size=32)
print(f"statistical global:      {g:.4f}")
print(f"statistical per-channel: {np.array2string(pc, precision=4)}")
print(f"statistical per-block:   mean {pb.spatial_mean():.4f}, "
      f"range [{pb.values.min():.4f}, {pb.values.max():.4f}]")
print()

# the per-block map follows the signal-dependent structure: bright areas get
# a higher sigma, dark areas a lower one, so coring adapts locally
corr = np.corrcoef(pb.values.ravel(), gt.values.ravel())[0, 1]
print(f"correlation of per-block map with ground truth: {corr:.3f}")
print()

base = preset("W2")
for label, source in [
    ("global statistical sigma", ("statistical", "global")),
    ("per-block statistical map", ("statistical", "per_block")),
    ("ground-truth map (oracle)", ("map", gt)),
]:
    out = denoise_image(noisy, replace(base, sigma_source=source))
    print(f"{label:28s} -> {mw.psnr(out, clean):.2f} dB")
