"""End-to-end trainer workflow (needs the mstrainer package and torch).

Builds a small synthetic dataset with the engine's make-dataset verb, trains
a 4x16 sigma network for a few epochs, exports it to a WNB1 bundle and runs
it back through the numpy inference engine, comparing blind denoising
against the weight-free statistical estimator.

About a minute on CPU; shrink --epochs below to make it faster.
"""

import tempfile
from dataclasses import replace
from pathlib import Path

import mstrainer as mt
import mswiener as mw
from mswiener.cli import main as engine_cli, read_manifest, run_config_on_dataset
from mswiener.pipeline import preset

work = Path(tempfile.mkdtemp(prefix="sigma_train_"))
clean_dir = work / "clean"
clean_dir.mkdir()
for i in range(12):
    mw.save_png(mw.make_test_image(2000 + i, 192), clean_dir / f"{i}.png")

train_ds, eval_ds = work / "train_ds", work / "eval_ds"
engine_cli(["make-dataset", str(clean_dir), "--out", str(train_ds),
            "--count", "40", "--patch", "96", "--seed", "11", "--clamp"])
engine_cli(["make-dataset", str(clean_dir), "--out", str(eval_ds),
            "--count", "20", "--patch", "128", "--seed", "99", "--clamp"])

config = mt.TrainConfig(depth=4, channels=16, epochs=120, batch_size=8,
                        patch=96, lr_period=60, seed=0)
print("training 4x16 sigma network (120 epochs)...")
bundle = mt.train_std_net(config, mt.PairDataset(train_ds))
losses = [row["l1"] for row in config.log if "l1" in row]
print(f"L1 loss: {losses[0]:.4f} (epoch 1) -> {losses[-1]:.4f} (epoch {len(losses)})")

bundle_path = work / "sigma_4x16.wnb"
mt.write_bundle(bundle, bundle_path)
engine_cli(["inspect-weights", str(bundle_path)])

entries = read_manifest(eval_ds)
statistical = run_config_on_dataset(preset("W2"), entries, eval_ds)
trained = run_config_on_dataset(
    replace(preset("W2"), sigma_source=("cnn", str(bundle_path), "per_block")),
    entries, eval_ds,
)
print()
print(f"held-out blind denoising, 20 images:")
print(f"  statistical per-block sigma: {statistical:.3f} dB")
print(f"  trained 4x16 sigma network:  {trained:.3f} dB  ({trained - statistical:+.3f} dB)")
print(f"artifacts in {work}")
