import math

import cv2
import numpy as np
import pytest

import mswiener as mw
from mswiener.errors import DataError
from mswiener.image import PSNR_CAP_DB


def write_gray8(path, arr):
    cv2.imwrite(str(path), np.asarray(arr, dtype=np.uint8))


def test_load_all_black_2x2(tmp_path):
    p = tmp_path / "black.png"
    write_gray8(p, np.zeros((2, 2)))
    img = mw.load_png(p)
    assert img.data.shape == (3, 2, 2)
    assert np.all(img.data == 0.0)


def test_load_scaling_8bit(tmp_path):
    p = tmp_path / "px.png"
    write_gray8(p, [[255]])
    assert mw.load_png(p).data[0, 0, 0] == 1.0
    write_gray8(p, [[128]])
    assert mw.load_png(p).data[0, 0, 0] == pytest.approx(128 / 255, abs=1e-7)


def test_load_16bit(tmp_path):
    p = tmp_path / "px16.png"
    cv2.imwrite(str(p), np.array([[65535, 32768]], dtype=np.uint16))
    img = mw.load_png(p)
    assert img.data[0, 0, 0] == 1.0
    assert img.data[0, 0, 1] == pytest.approx(32768 / 65535, abs=1e-7)


def test_load_quantized_grid(tmp_path):
    p = tmp_path / "g.png"
    rng = np.random.default_rng(0)
    raw = rng.integers(0, 256, size=(5, 7, 3), dtype=np.uint8)
    cv2.imwrite(str(p), raw)
    img = mw.load_png(p)
    # every loaded value is k/255 for integer k
    k = img.data * 255.0
    assert np.allclose(k, np.round(k), atol=1e-4)


def test_load_missing_file(tmp_path):
    with pytest.raises(DataError):
        mw.load_png(tmp_path / "nope.png")


def test_save_clamps_and_rounds(tmp_path):
    img = mw.from_array(np.array([[[1.2, -0.1, 0.5]]], dtype=np.float32).reshape(1, 1, 3))
    p = tmp_path / "c.png"
    mw.save_png(img, p)
    raw = cv2.imread(str(p), cv2.IMREAD_UNCHANGED)
    assert list(raw.ravel()) == [255, 0, 128]


def test_save_load_roundtrip_idempotent(tmp_path):
    rng = np.random.default_rng(1)
    img = mw.from_array(rng.uniform(-0.2, 1.2, size=(3, 9, 11)).astype(np.float32))
    p1, p2 = tmp_path / "a.png", tmp_path / "b.png"
    mw.save_png(img, p1)
    once = mw.load_png(p1)
    # equals clamp-quantized original exactly
    expect = np.floor(np.clip(img.data, 0, 1) * 255.0 + 0.5) / 255.0
    np.testing.assert_allclose(once.data, expect.astype(np.float32), atol=1e-7)
    mw.save_png(once, p2)
    np.testing.assert_array_equal(mw.load_png(p2).data, once.data)


def test_psnr_identical_capped():
    img = mw.make_test_image(0)
    assert mw.psnr(img, img) == PSNR_CAP_DB
    assert PSNR_CAP_DB >= 200.0


def test_psnr_constant_difference():
    a = mw.from_array(np.full((3, 8, 8), 0.5, dtype=np.float32))
    b = mw.from_array(np.full((3, 8, 8), 0.6, dtype=np.float32))
    assert mw.psnr(a, b) == pytest.approx(20.0, abs=1e-5)


def test_psnr_scalar_loop_oracle():
    rng = np.random.default_rng(2)
    a = mw.from_array(rng.uniform(size=(3, 6, 5)).astype(np.float32))
    b = mw.from_array(rng.uniform(size=(3, 6, 5)).astype(np.float32))
    total = 0.0
    count = 0
    for c in range(3):
        for i in range(6):
            for j in range(5):
                d = float(a.data[c, i, j]) - float(b.data[c, i, j])
                total += d * d
                count += 1
    expect = 10.0 * math.log10(1.0 / (total / count))
    assert mw.psnr(a, b) == pytest.approx(expect, abs=1e-9)


def test_psnr_symmetric():
    a, b = mw.make_test_image(3), mw.make_test_image(4)
    assert mw.psnr(a, b) == mw.psnr(b, a)


def test_psnr_dimension_mismatch():
    a = mw.from_array(np.zeros((3, 4, 4), dtype=np.float32))
    b = mw.from_array(np.zeros((3, 4, 5), dtype=np.float32))
    with pytest.raises(DataError):
        mw.psnr(a, b)


def test_psnr_monotone_in_noise_level():
    clean = mw.make_test_image(5)
    means = []
    for sigma in (0.02, 0.05, 0.1, 0.2):
        vals = [
            mw.psnr(mw.add_noise(clean, mw.NoiseParams(0.0, sigma, seed=s)), clean)
            for s in range(10)
        ]
        means.append(np.mean(vals))
    assert all(m1 > m2 for m1, m2 in zip(means, means[1:]))
