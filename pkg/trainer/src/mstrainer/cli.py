"""Command-line entry points for the trainer, mirroring the engine's verb
style: train-sigma, finetune, train-coring."""

from __future__ import annotations

import argparse
import json
import sys

from .bundles import BundleError, read_bundle, write_bundle
from .data import DataError, PairDataset
from .train import TrainConfig, finetune_end_to_end, train_coring_net, train_std_net


def cmd_train_sigma(args) -> int:
    config = TrainConfig(
        depth=args.depth, channels=args.channels, epochs=args.epochs,
        batch_size=args.batch_size, patch=args.patch, seed=args.seed,
    )
    dataset = PairDataset(args.dataset)
    bundle = train_std_net(config, dataset)
    write_bundle(bundle, args.out)
    if args.log:
        with open(args.log, "w") as fh:
            for row in config.log:
                fh.write(json.dumps(row) + "\n")
    last = next((r for r in reversed(config.log) if "l1" in r), None)
    tail = f", final L1 {last['l1']:.5f}" if last else ""
    print(f"wrote {args.out} ({args.depth}x{args.channels}, {args.epochs} epochs{tail})")
    return 0


def cmd_finetune(args) -> int:
    bundle = read_bundle(args.bundle)
    dataset = PairDataset(args.dataset)
    out = finetune_end_to_end(
        bundle, dataset, steps=args.steps, lr=args.lr,
        block_size=args.block_size, seed=args.seed,
    )
    write_bundle(out, args.out)
    print(f"wrote {args.out} ({args.steps} fine-tuning steps)")
    return 0


def cmd_train_coring(args) -> int:
    std_bundle = read_bundle(args.sigma_bundle)
    dataset = PairDataset(args.dataset)
    out = train_coring_net(
        std_bundle, dataset, steps=args.steps, lr=args.lr,
        block_size=args.block_size, seed=args.seed,
    )
    write_bundle(out, args.out)
    print(f"wrote {args.out} ({args.steps} coring-training steps)")
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mstrainer", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("train-sigma", help="L1 regression of noise-STD maps")
    p.add_argument("dataset", help="dataset directory with manifest.jsonl")
    p.add_argument("--out", required=True, help="output WNB1 bundle path")
    p.add_argument("--depth", type=int, default=4)
    p.add_argument("--channels", type=int, default=16)
    p.add_argument("--epochs", type=int, default=4000)
    p.add_argument("--batch-size", type=int, default=24, dest="batch_size")
    p.add_argument("--patch", type=int, default=128)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--log", help="optional JSONL per-epoch loss log")
    p.set_defaults(func=cmd_train_sigma)

    p = sub.add_parser("finetune", help="end-to-end fine-tuning of a sigma bundle")
    p.add_argument("bundle", help="input sigma WNB1 bundle")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--block-size", type=int, default=16, dest="block_size")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_finetune)

    p = sub.add_parser("train-coring", help="train the coring refinement network")
    p.add_argument("sigma_bundle", help="frozen sigma WNB1 bundle")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--block-size", type=int, default=16, dest="block_size")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train_coring)

    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except (BundleError, DataError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:  # config-shaped problems (bad grid point, etc.)
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
