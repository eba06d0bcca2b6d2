"""Command line: train the LeNet victim, export its weights, serve models."""

import argparse
import sys

import spoofkit

from .errors import BridgeError
from .export import export_lenet_weights
from .lenet import LeNet, LeNetTrainConfig, load_checkpoint, save_checkpoint, train_lenet
from .server import BridgeConfig, serve


def cmd_train_lenet(args) -> int:
    train, test = spoofkit.load_mnist_dir(args.data)
    model = LeNet()
    cfg = LeNetTrainConfig(epochs=args.epochs, learning_rate=args.lr,
                           batch_size=args.batch_size, seed=args.seed)
    report = train_lenet(model, train.images, train.labels, test.images, test.labels, cfg)
    save_checkpoint(model, args.out)
    print(f"epochs {report.epochs}  train loss {report.train_loss:.4f}  "
          f"test accuracy {report.test_accuracy:.4f}")
    print(f"checkpoint written to {args.out}")
    return 0


def cmd_export(args) -> int:
    model = load_checkpoint(args.checkpoint)
    converted = export_lenet_weights(model, args.out)
    total = sum(arr.size for arr in converted.values())
    print(f"wrote {len(converted)} tensors ({total} values) to {args.out}")
    return 0


def cmd_serve(args) -> int:
    cfg = BridgeConfig(
        model_id=args.model,
        checkpoint=args.checkpoint,
        weights_dir=args.weights_dir,
        host=args.bind,
        port=args.port,
        stdio=args.stdio,
        batch_cap=args.batch_cap,
    )
    serve(cfg)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spoofbridge",
        description="Serve torch image classifiers over spoofkit's wire protocol",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("train-lenet", help="train the LeNet victim on MNIST IDX files")
    sp.add_argument("--data", required=True, help="directory with MNIST IDX files")
    sp.add_argument("--epochs", type=int, default=4)
    sp.add_argument("--lr", type=float, default=1e-3)
    sp.add_argument("--batch-size", type=int, default=64)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True, help="output checkpoint (.pt)")
    sp.set_defaults(func=cmd_train_lenet)

    sp = sub.add_parser("export", help="convert a LeNet checkpoint to an SPWT file")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_export)

    sp = sub.add_parser("serve", help="serve a model over TCP or stdio")
    sp.add_argument("--model", required=True,
                    choices=("lenet", "alexnet", "resnet50", "vit_b16"))
    sp.add_argument("--checkpoint", help="LeNet checkpoint path")
    sp.add_argument("--weights-dir", help="torchvision cache for pretrained checkpoints")
    sp.add_argument("--bind", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=0)
    sp.add_argument("--stdio", action="store_true",
                    help="speak the protocol on stdin/stdout instead of TCP")
    sp.add_argument("--batch-cap", type=int, default=256)
    sp.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except BridgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
