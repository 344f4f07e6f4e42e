"""Command-line front end.

Verbs: denoise, make-dataset, ablate, inspect-weights.
Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.
MSWIENER_WORKERS overrides the per-image worker count (results are merged
in input order, so reports do not depend on it).
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .blocks import ScaleMode
from .errors import ConfigError, DataError, MsWienerError, NumericError
from .image import ImagePlanar, load_png, psnr, save_png
from .noisegen import (
    SIGMA_C_RANGE,
    SIGMA_S_RANGE,
    NoiseParams,
    add_noise,
    derive_seed,
    ground_truth_sigma_map,
)
from .pipeline import RunConfig, config_hash, denoise_image, preset
from .sigma import NetworkDef, SigmaMap, param_count
from .weights import KIND_NAMES, ROLE_CORING, ROLE_SIGMA, read_bundle
from .wiener import DcKind, DcStrategy
from .windows import WindowKind

SIGMA_PNG_SCALE = 0.5  # stored 16-bit value = sigma * 65535 / SIGMA_PNG_SCALE


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("MSWIENER_WORKERS", "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# flag parsing helpers


def parse_sigma_source(text: str) -> tuple:
    kind, _, rest = text.partition(":")
    if kind == "fixed":
        vals = [float(v) for v in rest.split(",") if v]
        if len(vals) == 1:
            return ("fixed", vals[0])
        if len(vals) == 3:
            return ("fixed_per_channel", tuple(vals))
        raise ConfigError(f"fixed sigma needs 1 or 3 values, got {text!r}")
    if kind == "oracle-pc":
        return ("oracle_per_channel",)
    if kind == "gtmap":
        # dataset ground-truth sigma maps; an oracle source, flagged in reports
        return ("dataset",)
    if kind == "stat":
        scope = rest or "per_block"
        if scope not in ("global", "per_channel", "per_block"):
            raise ConfigError(f"unknown statistical scope {scope!r}")
        return ("statistical", scope)
    if kind == "cnn":
        if not rest:
            raise ConfigError("cnn sigma source needs a bundle path: cnn:PATH[:reduction]")
        path, _, reduction = rest.partition(":")
        return ("cnn", path, reduction) if reduction else ("cnn", path)
    raise ConfigError(f"unknown sigma source {text!r}")


def parse_dc(text: str) -> DcStrategy:
    if text == "mean":
        return DcStrategy(DcKind.MEAN)
    if text == "median":
        return DcStrategy(DcKind.MEDIAN)
    if text == "oracle":
        return DcStrategy(DcKind.ORACLE)
    if text.startswith("quantile:"):
        return DcStrategy(DcKind.QUANTILE, q=float(text.split(":", 1)[1]))
    raise ConfigError(f"unknown DC strategy {text!r}")


def parse_window(text: str) -> WindowKind:
    for kind in WindowKind:
        if kind.value == text:
            return kind
    raise ConfigError(f"unknown window kind {text!r}")


_OVERRIDE_KEYS = (
    "window",
    "alpha",
    "block_size",
    "stride_denominator",
    "scales",
    "scale_mode",
    "sigma",
    "sigma_block_size",
    "dc",
    "correction",
    "coring_bundle",
    "coring_scale",
)


def build_config(level: str | None, overrides: dict) -> RunConfig:
    """A preset (or bare default) with explicit flags winning over it."""
    config = preset(level) if level else RunConfig()
    for key, value in overrides.items():
        if value is None:
            continue
        if key == "window":
            config = replace(config, window_kind=parse_window(value))
        elif key == "sigma":
            config = replace(config, sigma_source=parse_sigma_source(value))
        elif key == "dc":
            config = replace(config, dc=parse_dc(value))
        elif key == "scales":
            if isinstance(value, str):
                value = [int(v) for v in value.split(",") if v]
            config = replace(config, scales=tuple(value) if value else None)
        elif key == "scale_mode":
            config = replace(config, scale_mode=ScaleMode(value))
        elif key in _OVERRIDE_KEYS:
            config = replace(config, **{key: value})
        else:
            raise ConfigError(f"unknown config key {key!r}")
    return config


def load_config_file(path: str) -> dict:
    """Flat key=value text config, mirrored by the CLI flags."""
    overrides = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read config file {path}: {exc}") from exc
    for raw in lines:
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line without '=': {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in ("alpha", "correction"):
            overrides[key] = float(value)
        elif key in ("block_size", "stride_denominator", "sigma_block_size", "coring_scale"):
            overrides[key] = int(value)
        elif key == "level":
            overrides[key] = value
        elif key in _OVERRIDE_KEYS:
            overrides[key] = value
        else:
            raise ConfigError(f"unknown config key {key!r} in {path}")
    return overrides


# ---------------------------------------------------------------------------
# denoise


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--level", choices=["W0", "W1", "W2", "W3", "W4"])
    parser.add_argument("--config", help="key=value config file; explicit flags win")
    parser.add_argument("--window", help="gaussian | raised-cosine")
    parser.add_argument("--alpha", type=float)
    parser.add_argument("--block-size", type=int, dest="block_size")
    parser.add_argument("--stride-denominator", type=int, dest="stride_denominator")
    parser.add_argument("--scales", help="comma list of block sizes, empty for single scale")
    parser.add_argument("--scale-mode", dest="scale_mode", choices=["average", "joint"])
    parser.add_argument(
        "--sigma", help="fixed:V | fixed:R,G,B | oracle-pc | stat:SCOPE | cnn:PATH[:reduction]"
    )
    parser.add_argument("--sigma-block-size", type=int, dest="sigma_block_size")
    parser.add_argument("--dc", help="mean | median | oracle | quantile:Q")
    parser.add_argument("--correction", type=float)
    parser.add_argument("--coring-bundle", dest="coring_bundle")
    parser.add_argument("--coring-scale", type=int, dest="coring_scale")


def _config_from_args(args) -> RunConfig:
    overrides = {}
    level = args.level
    if args.config:
        file_over = load_config_file(args.config)
        level = level or file_over.pop("level", None)
        overrides.update(file_over)
    for key in _OVERRIDE_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            overrides[key] = val
    return build_config(level, overrides)


def cmd_denoise(args) -> int:
    config = _config_from_args(args)
    inputs = [Path(p) for p in args.inputs]
    cleans = [Path(p) for p in args.clean] if args.clean else None
    if cleans and len(cleans) != len(inputs):
        raise ConfigError(f"{len(inputs)} inputs but {len(cleans)} clean references")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    def run_one(i: int):
        noisy = load_png(inputs[i])
        clean = load_png(cleans[i]) if cleans else None
        result = denoise_image(noisy, config, clean=clean)
        out_path = out_dir / f"{inputs[i].stem}_denoised.png"
        save_png(result, out_path)
        row = {"file": inputs[i].name, "out": str(out_path)}
        if clean is not None:
            row["psnr_noisy_db"] = psnr(noisy, clean)
            row["psnr_out_db"] = psnr(result, clean)
        return row

    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        rows = list(pool.map(run_one, range(len(inputs))))

    oracle = config.sigma_source[0] == "oracle_per_channel" or config.dc.kind is DcKind.ORACLE
    print(f"config {config_hash(config)} level={config.level}" + (" [oracle]" if oracle else ""))
    for row in rows:
        if "psnr_out_db" in row:
            print(
                f"{row['file']}: {row['psnr_noisy_db']:.2f} dB -> {row['psnr_out_db']:.2f} dB"
            )
        else:
            print(f"{row['file']}: -> {row['out']}")
    if any("psnr_out_db" in r for r in rows):
        mean = float(np.mean([r["psnr_out_db"] for r in rows if "psnr_out_db" in r]))
        print(f"mean PSNR: {mean:.3f} dB")
    return 0


# ---------------------------------------------------------------------------
# make-dataset


def cmd_make_dataset(args) -> int:
    clean_dir = Path(args.clean_dir)
    files = sorted(clean_dir.glob("*.png"))
    if not files:
        raise DataError(f"no PNG files in {clean_dir}")
    out = Path(args.out)
    for sub in ("clean", "noisy", "sigma"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    manifest_path = out / "manifest.jsonl"
    with open(manifest_path, "w") as manifest:
        for i in range(args.count):
            src = files[int(rng.integers(len(files)))]
            img = load_png(src)
            patch = args.patch
            if img.height < patch or img.width < patch:
                raise DataError(f"{src} is smaller than the {patch}x{patch} patch size")
            r0 = int(rng.integers(img.height - patch + 1))
            c0 = int(rng.integers(img.width - patch + 1))
            clean = ImagePlanar(img.data[:, r0 : r0 + patch, c0 : c0 + patch].copy())
            params = NoiseParams(
                sigma_s=float(rng.uniform(*args.sigma_s_range)),
                sigma_c=float(rng.uniform(*args.sigma_c_range)),
                seed=derive_seed(args.seed, i),
            )
            noisy = add_noise(clean, params, clamp=args.clamp)
            gt_map = ground_truth_sigma_map(clean, params)
            stem = f"img_{i:04d}"
            save_png(clean, out / "clean" / f"{stem}.png")
            save_png(noisy, out / "noisy" / f"{stem}.png")
            sigma_png = ImagePlanar(gt_map.values / SIGMA_PNG_SCALE)
            save_png(sigma_png, out / "sigma" / f"{stem}.png", bit_depth=16)
            manifest.write(
                json.dumps(
                    {
                        "index": i,
                        "clean": f"clean/{stem}.png",
                        "noisy": f"noisy/{stem}.png",
                        "sigma_map": f"sigma/{stem}.png",
                        "sigma_png_scale": SIGMA_PNG_SCALE,
                        "source": src.name,
                        "crop": [r0, c0],
                        "sigma_s": params.sigma_s,
                        "sigma_c": params.sigma_c,
                        "seed": params.seed,
                        "clamp": bool(args.clamp),
                    },
                    sort_keys=True,
                )
                + "\n"
            )
    print(f"wrote {args.count} pairs to {out} (manifest: {manifest_path})")
    return 0


def read_manifest(dataset_dir: str) -> list:
    path = Path(dataset_dir) / "manifest.jsonl"
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read dataset manifest {path}: {exc}") from exc
    return [json.loads(line) for line in lines if line.strip()]


# ---------------------------------------------------------------------------
# ablate


def _grid_rows(grid: dict) -> list:
    axes = grid.get("axes", {})
    if not axes:
        raise ConfigError("ablation grid has no axes")
    keys = sorted(axes)
    rows = []
    for combo in itertools.product(*(axes[k] for k in keys)):
        rows.append(dict(zip(keys, combo)))
    return rows


def run_config_on_dataset(config: RunConfig, entries: list, dataset_dir: Path) -> float:
    def run_one(entry):
        noisy = load_png(dataset_dir / entry["noisy"])
        clean = load_png(dataset_dir / entry["clean"])
        cfg = config
        if config.sigma_source == ("dataset",):
            stored = load_png(dataset_dir / entry["sigma_map"])
            scale = float(entry.get("sigma_png_scale", SIGMA_PNG_SCALE))
            sigma_map = SigmaMap(stored.data.astype(np.float64) * scale)
            cfg = replace(config, sigma_source=("map", sigma_map))
        out = denoise_image(noisy, cfg, clean=clean)
        return psnr(out, clean)

    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        values = list(pool.map(run_one, entries))
    return float(np.mean(values))


def cmd_ablate(args) -> int:
    try:
        grid = json.loads(Path(args.grid).read_text())
    except OSError as exc:
        raise DataError(f"cannot read grid spec {args.grid}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"grid spec {args.grid} is not valid JSON: {exc}") from exc
    entries = read_manifest(args.dataset)
    if not entries:
        raise DataError(f"dataset manifest in {args.dataset} is empty")
    dataset_dir = Path(args.dataset)
    base = dict(grid.get("base", {}))
    base_level = base.pop("level", None)
    rows = _grid_rows(grid)
    axis_keys = sorted(grid["axes"])

    out_csv = Path(args.out)
    out_csv.parent.mkdir(parents=True, exist_ok=True)
    results = []
    with open(out_csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["config_hash", *axis_keys, "mean_psnr_db", "runtime_s"])
        fh.flush()
        for row in rows:
            overrides = dict(base)
            overrides.update(row)
            level = overrides.pop("level", base_level)
            config = build_config(level, overrides)
            start = time.perf_counter()
            try:
                mean_psnr = run_config_on_dataset(config, entries, dataset_dir)
            except MsWienerError:
                fh.flush()
                raise
            runtime = time.perf_counter() - start
            record = [config_hash(config), *(row[k] for k in axis_keys),
                      f"{mean_psnr:.6f}", f"{runtime:.3f}"]
            writer.writerow(record)
            fh.flush()
            results.append((row, config, mean_psnr, runtime))
            print(f"{config_hash(config)} {row} -> {mean_psnr:.3f} dB ({runtime:.1f}s)")

    md_path = out_csv.with_suffix(".md")
    with open(md_path, "w") as fh:
        fh.write(f"# Ablation report\n\ndataset: `{args.dataset}` ({len(entries)} images)\n\n")
        fh.write("| " + " | ".join(["config", *axis_keys, "mean PSNR (dB)"]) + " |\n")
        fh.write("|" + "---|" * (len(axis_keys) + 2) + "\n")
        for row, config, mean_psnr, _ in results:
            cells = [config_hash(config), *(str(row[k]) for k in axis_keys), f"{mean_psnr:.2f}"]
            fh.write("| " + " | ".join(cells) + " |\n")
    print(f"wrote {out_csv} and {md_path}")
    return 0


# ---------------------------------------------------------------------------
# inspect-weights


def cmd_inspect_weights(args) -> int:
    bundle = read_bundle(args.bundle)
    role = {ROLE_SIGMA: "sigma network", ROLE_CORING: "coring network"}.get(
        bundle.role, f"unknown ({bundle.role})"
    )
    print(f"{args.bundle}: {role}, depth {bundle.depth}, {bundle.channels} channels")
    print(f"records: {bundle.tensor_count()}, values: {bundle.value_count()}")
    for i, (kind, arr) in enumerate(bundle.records):
        print(f"  [{i:2d}] {KIND_NAMES.get(kind, kind):12s} {tuple(arr.shape)}")
    if bundle.role == ROLE_SIGMA:
        net = NetworkDef(depth=bundle.depth, channels=bundle.channels)
        print(f"closed-form trainable parameter count: {param_count(net)}")
    return 0


# ---------------------------------------------------------------------------


def _range_pair(text: str) -> tuple:
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 2 or parts[0] > parts[1]:
        raise argparse.ArgumentTypeError(f"expected LO,HI range, got {text!r}")
    return tuple(parts)


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mswiener", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("denoise", help="denoise PNG images")
    p.add_argument("inputs", nargs="+", help="noisy PNG files")
    p.add_argument("--clean", nargs="*", help="matching clean references (enables PSNR)")
    p.add_argument("--out", required=True, help="output directory")
    _add_config_flags(p)
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("make-dataset", help="generate noisy/clean pairs with sigma maps")
    p.add_argument("clean_dir", help="directory of clean PNG images")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=50)
    p.add_argument("--patch", type=int, default=128)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sigma-s-range", type=_range_pair, default=SIGMA_S_RANGE)
    p.add_argument("--sigma-c-range", type=_range_pair, default=SIGMA_C_RANGE)
    p.add_argument("--clamp", action="store_true", help="clamp noisy output to [0,1]")
    p.set_defaults(func=cmd_make_dataset)

    p = sub.add_parser("ablate", help="run a configuration grid over a dataset")
    p.add_argument("grid", help="JSON grid spec with 'base' and 'axes'")
    p.add_argument("--dataset", required=True, help="dataset dir with manifest.jsonl")
    p.add_argument("--out", required=True, help="output CSV path (.md written alongside)")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("inspect-weights", help="describe a WNB1 weight bundle")
    p.add_argument("bundle")
    p.set_defaults(func=cmd_inspect_weights)

    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
