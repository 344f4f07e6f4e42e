import numpy as np
import pytest

import mswiener as mw


@pytest.fixture(scope="session")
def clean_set():
    """20 synthetic clean 128x128 test images."""
    return [mw.make_test_image(i) for i in range(20)]


@pytest.fixture(scope="session")
def awgn_set(clean_set):
    """(noisy, clean) pairs under AWGN sigma = 25/255."""
    return [
        (mw.add_noise(im, mw.NoiseParams(0.0, 25.0 / 255.0, seed=100 + i)), im)
        for i, im in enumerate(clean_set)
    ]


@pytest.fixture(scope="session")
def sd_set(clean_set):
    """(noisy, clean) pairs under clamped signal-dependent noise sigma_s=0.14."""
    return [
        (mw.add_noise(im, mw.NoiseParams(0.14, 0.0, seed=200 + i), clamp=True), im)
        for i, im in enumerate(clean_set)
    ]


@pytest.fixture(scope="session")
def dark_sd_set(clean_set):
    """Dark (x0.15) clean images, clamped sigma_s=0.14 / sigma_c=0.05 noise,
    with ground-truth sigma maps; the DC-strategy stress set."""
    out = []
    for i, im in enumerate(clean_set):
        clean = mw.ImagePlanar((im.data * 0.15).astype(np.float32))
        params = mw.NoiseParams(0.14, 0.05, seed=300 + i)
        noisy = mw.add_noise(clean, params, clamp=True)
        out.append((noisy, clean, mw.ground_truth_sigma_map(clean, params)))
    return out
