import hashlib
import json
import os
from pathlib import Path

import numpy as np
import pytest

import mswiener as mw
from mswiener.cli import main, read_manifest
from mswiener.noisegen import NoiseParams, add_noise, make_test_image
from mswiener.weights import ROLE_SIGMA, WeightBundle, write_bundle
from tests.test_sigma import random_bundle


def write_clean_corpus(path: Path, count=3, size=160):
    path.mkdir(parents=True, exist_ok=True)
    for i in range(count):
        mw.save_png(make_test_image(500 + i, size), path / f"clean_{i}.png")


def tree_digest(root: Path) -> str:
    digest = hashlib.sha256()
    for p in sorted(root.rglob("*")):
        if p.is_file():
            digest.update(str(p.relative_to(root)).encode())
            digest.update(p.read_bytes())
    return digest.hexdigest()


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    base = tmp_path_factory.mktemp("dataset")
    clean_dir = base / "clean_src"
    write_clean_corpus(clean_dir)
    out = base / "ds"
    rc = main(
        ["make-dataset", str(clean_dir), "--out", str(out), "--count", "6", "--seed", "42"]
    )
    assert rc == 0
    return out


class TestMakeDataset:
    def test_layout_and_manifest(self, dataset):
        entries = read_manifest(dataset)
        assert len(entries) == 6
        for entry in entries:
            for key in ("clean", "noisy", "sigma_map"):
                assert (dataset / entry[key]).is_file()
            assert 0.0 <= entry["sigma_s"] <= 0.16
            assert 0.0 <= entry["sigma_c"] <= 0.06

    def test_byte_identical_determinism(self, dataset, tmp_path):
        clean_dir = dataset.parent / "clean_src"
        out2 = tmp_path / "ds2"
        rc = main(
            ["make-dataset", str(clean_dir), "--out", str(out2), "--count", "6", "--seed", "42"]
        )
        assert rc == 0
        assert tree_digest(dataset) == tree_digest(out2)

    def test_stored_sigma_map_roundtrip(self, dataset):
        # the 16-bit sigma PNG reproduces the analytic map to quantization
        entry = read_manifest(dataset)[0]
        clean = mw.load_png(dataset / entry["clean"])
        params = NoiseParams(entry["sigma_s"], entry["sigma_c"], entry["seed"])
        from mswiener.noisegen import ground_truth_sigma_map

        gt = ground_truth_sigma_map(clean, params)
        stored = mw.load_png(dataset / entry["sigma_map"])
        recovered = stored.data.astype(np.float64) * entry["sigma_png_scale"]
        assert np.max(np.abs(recovered - gt.values)) < entry["sigma_png_scale"] / 65535.0

    def test_missing_corpus_exit_code(self, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        rc = main(["make-dataset", str(empty), "--out", str(tmp_path / "o")])
        assert rc == 3


class TestDenoise:
    def test_zero_noise_near_perfect(self, tmp_path, capsys):
        clean = make_test_image(700)
        src = tmp_path / "img.png"
        mw.save_png(clean, src)
        rc = main(
            ["denoise", str(src), "--clean", str(src), "--out", str(tmp_path / "out"),
             "--level", "W0", "--sigma", "fixed:0.0005"]
        )
        assert rc == 0
        out = capsys.readouterr().out
        line = [l for l in out.splitlines() if "mean PSNR" in l][0]
        assert float(line.split()[-2]) >= 60.0

    def test_worker_env_does_not_change_result(self, dataset, tmp_path):
        entry = read_manifest(dataset)[0]
        noisy = dataset / entry["noisy"]
        outputs = []
        for workers in ("1", "4"):
            out_dir = tmp_path / f"w{workers}"
            os.environ["MSWIENER_WORKERS"] = workers
            try:
                rc = main(["denoise", str(noisy), "--out", str(out_dir), "--level", "W2"])
            finally:
                del os.environ["MSWIENER_WORKERS"]
            assert rc == 0
            outputs.append((out_dir / f"{noisy.stem}_denoised.png").read_bytes())
        assert outputs[0] == outputs[1]

    def test_oracle_flag_printed(self, dataset, tmp_path, capsys):
        entry = read_manifest(dataset)[0]
        rc = main(
            ["denoise", str(dataset / entry["noisy"]),
             "--clean", str(dataset / entry["clean"]),
             "--out", str(tmp_path / "o"), "--level", "W1"]
        )
        assert rc == 0
        assert "[oracle]" in capsys.readouterr().out

    def test_mismatched_clean_count_exit_code(self, dataset, tmp_path):
        entries = read_manifest(dataset)[:2]
        rc = main(
            ["denoise", *(str(dataset / e["noisy"]) for e in entries),
             "--clean", str(dataset / entries[0]["clean"]),
             "--out", str(tmp_path / "o"), "--level", "W0"]
        )
        assert rc == 2

    def test_missing_input_exit_code(self, tmp_path):
        rc = main(
            ["denoise", str(tmp_path / "nope.png"), "--out", str(tmp_path / "o"),
             "--level", "W0"]
        )
        assert rc == 3

    def test_bad_sigma_spec_exit_code(self, dataset, tmp_path):
        entry = read_manifest(dataset)[0]
        rc = main(
            ["denoise", str(dataset / entry["noisy"]), "--out", str(tmp_path / "o"),
             "--level", "W0", "--sigma", "bogus:1"]
        )
        assert rc == 2

    def test_config_file_applied_and_flags_win(self, dataset, tmp_path, capsys):
        entry = read_manifest(dataset)[0]
        cfg = tmp_path / "run.cfg"
        cfg.write_text("level=W2\nblock_size=16\n")
        rc = main(
            ["denoise", str(dataset / entry["noisy"]),
             "--clean", str(dataset / entry["clean"]),
             "--out", str(tmp_path / "o"), "--config", str(cfg), "--block-size", "32"]
        )
        assert rc == 0
        assert "level=W2" in capsys.readouterr().out


def test_w0_matches_naive_reference(dataset):
    # the W0 path must agree exactly with a direct per-block implementation of
    # the baseline: raised-cosine 38x38 window, half-block stride, mean DC,
    # fixed sigma 10/255 with 1.4 correction, plain windowed overlap-add
    entry = read_manifest(dataset)[0]
    noisy = mw.load_png(dataset / entry["noisy"])
    from mswiener.pipeline import preset, denoise_image

    out = denoise_image(noisy, preset("W0"))

    n, sigma, corr = 38, 10.0 / 255.0, 1.4
    window = mw.make_window(mw.WindowSpec(mw.WindowKind.RAISED_COSINE, n))
    plan = mw.make_plan((noisy.height, noisy.width), n, 2)
    w = window.values
    w32 = w.astype(np.float32)
    padded = np.pad(
        noisy.data.astype(np.float32),
        ((0, 0), (plan.pad, plan.pad_bottom), (plan.pad, plan.pad_right)),
        mode="reflect",
    )
    x_sum = np.zeros_like(padded, dtype=np.float64)
    p_nn = (corr * sigma) ** 2 * window.norm_sq
    for r in plan.origin_rows:
        for c in plan.origin_cols:
            for ch in range(3):
                block = padded[ch, r : r + n, c : c + n]
                dc = block.reshape(-1).mean()  # float32 mean, as in the engine
                wb = (block.astype(np.float64) - np.float64(dc)) * w
                spec = np.fft.fft2(wb)
                p_yy = spec.real**2 + spec.imag**2
                p_xx = np.maximum(p_yy - p_nn, 0.0)
                h = np.where(p_yy > 1e-20, p_xx / np.maximum(p_yy, 1e-20), 0.0)
                rec = np.fft.ifft2(spec * h).real + np.float64(dc) * w
                x_sum[ch, r : r + n, c : c + n] += w32 * rec.astype(np.float32)
    crop = x_sum[
        :, plan.pad : plan.pad + noisy.height, plan.pad : plan.pad + noisy.width
    ].astype(np.float32)
    np.testing.assert_array_equal(out.data, crop)


class TestAblate:
    def test_grid_run_and_artifacts(self, dataset, tmp_path, capsys):
        grid = tmp_path / "grid.json"
        grid.write_text(json.dumps({
            "base": {"level": "W2"},
            "axes": {"stride_denominator": [2, 4]},
        }))
        out_csv = tmp_path / "ablation.csv"
        rc = main(["ablate", str(grid), "--dataset", str(dataset), "--out", str(out_csv)])
        assert rc == 0
        lines = out_csv.read_text().strip().splitlines()
        assert lines[0] == "config_hash,stride_denominator,mean_psnr_db,runtime_s"
        assert len(lines) == 3
        assert out_csv.with_suffix(".md").is_file()
        # repeat run: config hashes and PSNR values must be identical
        out2 = tmp_path / "ablation2.csv"
        rc = main(["ablate", str(grid), "--dataset", str(dataset), "--out", str(out2)])
        assert rc == 0
        first = [l.split(",")[:3] for l in lines[1:]]
        second = [l.split(",")[:3] for l in out2.read_text().strip().splitlines()[1:]]
        assert first == second

    def test_empty_axes_exit_code(self, dataset, tmp_path):
        grid = tmp_path / "grid.json"
        grid.write_text(json.dumps({"base": {"level": "W0"}, "axes": {}}))
        rc = main(["ablate", str(grid), "--dataset", str(dataset), "--out", str(tmp_path / "a.csv")])
        assert rc == 2

    def test_bad_json_exit_code(self, dataset, tmp_path):
        grid = tmp_path / "grid.json"
        grid.write_text("{not json")
        rc = main(["ablate", str(grid), "--dataset", str(dataset), "--out", str(tmp_path / "a.csv")])
        assert rc == 2

    def test_missing_dataset_exit_code(self, tmp_path):
        grid = tmp_path / "grid.json"
        grid.write_text(json.dumps({"axes": {"level": ["W0"]}}))
        rc = main(["ablate", str(grid), "--dataset", str(tmp_path / "no_ds"),
                   "--out", str(tmp_path / "a.csv")])
        assert rc == 3


class TestInspectWeights:
    def test_summary_output(self, tmp_path, capsys):
        bundle = random_bundle(4, 32, seed=1)
        path = tmp_path / "net.wnb"
        write_bundle(bundle, path)
        rc = main(["inspect-weights", str(path)])
        assert rc == 0
        out = capsys.readouterr().out
        assert "sigma network, depth 4, 32 channels" in out
        assert "parameter count: 20451" in out

    def test_corrupt_bundle_exit_code(self, tmp_path):
        path = tmp_path / "bad.wnb"
        path.write_bytes(b"WNB1" + bytes(16))
        rc = main(["inspect-weights", str(path)])
        assert rc == 3
