"""Command-line entry points: train, attack, evolve, retrain, metrics, export, serve-stub."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from .datasets import load_mnist_dir
from .errors import (
    CapacityError,
    ConfigError,
    FormatError,
    NotFoundError,
    ProtocolError,
    SpoofkitError,
    TrainingScopeError,
    TransportError,
)
from .experiment import (
    ExperimentConfig,
    export_heatmap_csv,
    load_run_records,
    resolve_network,
    run_experiment,
)
from .image import InitMode, load_png
from .metrics import aggregate, write_aggregate_csv
from .retrain import (
    TrainConfig,
    build_fooling_class_dataset,
    evaluate_accuracy,
    extend_final_layer,
    fine_tune_final_layer,
    train_dense,
)
from .weights import load_weights, save_weights
from .wire import UniformStubHandler, WireServer, serve_stdio

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_ORACLE = 2
EXIT_PARTIAL = 3


def _parse_ints(text: str) -> Tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(",") if part != "")
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from exc


def _oracle_dict(args) -> dict:
    if getattr(args, "host", None):
        if args.port is None:
            raise ConfigError("--host requires --port")
        return {"backend": "remote", "host": args.host, "port": args.port}
    if getattr(args, "oracle_cmd", None):
        return {"backend": "remote", "command": args.oracle_cmd}
    if not getattr(args, "weights_file", None):
        raise ConfigError("builtin oracle needs --weights (or use --host/--oracle-cmd)")
    net = args.network
    if net.endswith(".json"):
        net = json.loads(Path(net).read_text())
    return {"backend": "builtin", "network": net, "weights": args.weights_file}


def _add_oracle_flags(sp) -> None:
    sp.add_argument("--network", default="mlp",
                    help="builtin network: mlp, lenet, or a spec .json file")
    sp.add_argument("--weights", dest="weights_file", help="SPWT weight file for the builtin oracle")
    sp.add_argument("--host", help="remote oracle TCP host")
    sp.add_argument("--port", type=int, help="remote oracle TCP port")
    sp.add_argument("--oracle-cmd", nargs="+", help="spawn a stdio oracle server command")
    sp.add_argument("--classifier-id", default="", help="label used in records and aggregates")


def _experiment_from_args(args, attack: str) -> ExperimentConfig:
    if args.config:
        return ExperimentConfig.load(args.config)
    common = dict(
        attack=attack,
        oracle=_oracle_dict(args),
        seeds=_parse_ints(args.seeds),
        classifier_id=args.classifier_id,
        targets=_parse_ints(args.targets) if args.targets else None,
        asr_threshold=args.asr_threshold,
    )
    if attack == "spoof":
        return ExperimentConfig(
            budget=args.budget,
            init=InitMode.from_string(args.init),
            early_stop_confidence=args.early_stop,
            checkpoint_stride=args.stride,
            **common,
        )
    return ExperimentConfig(
        population_size=args.population,
        generations=args.generations,
        **common,
    )


def _ensure_parent(path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _finish_run(outcome) -> int:
    for failure in outcome.failures:
        print(f"FAILED {failure}", file=sys.stderr)
    print(f"run directory: {outcome.directory}")
    if outcome.aggregate is not None:
        a = outcome.aggregate
        print(
            f"{a.attack} vs {a.classifier_id}: median confidence {a.median_confidence:.4f}, "
            f"ASR {a.fooling_asr:.2%}, median PCR {a.median_pcr:.4f}, "
            f"queries/target {a.mean_queries:.1f}"
        )
    return EXIT_PARTIAL if outcome.failures else EXIT_OK


def cmd_train(args) -> int:
    train, test = load_mnist_dir(args.data)
    spec = resolve_network(args.network)
    cfg = TrainConfig(
        learning_rate=args.lr,
        epochs=args.epochs,
        batch_size=args.batch_size,
        seed=args.seed,
        trainable_scope=args.scope,
    )
    outcome = train_dense(spec, train, test, cfg)
    for stat in outcome.history:
        val = f"{stat.val_accuracy:.4f}" if stat.val_accuracy is not None else "n/a"
        print(f"epoch {stat.epoch}: loss {stat.loss:.4f} "
              f"train {stat.train_accuracy:.4f} val {val}")
    save_weights(outcome.weights, _ensure_parent(args.out))
    accuracy = evaluate_accuracy(spec, outcome.weights, test.images, test.labels)
    print(f"saved {args.out}; test accuracy {accuracy:.4f}")
    return EXIT_OK


def cmd_attack(args) -> int:
    cfg = _experiment_from_args(args, "spoof")
    return _finish_run(run_experiment(cfg, args.out))


def cmd_evolve(args) -> int:
    cfg = _experiment_from_args(args, args.encoding)
    return _finish_run(run_experiment(cfg, args.out))


def _load_fooling_images(run_dirs) -> List[Tuple[int, np.ndarray]]:
    images = []
    for run_dir in run_dirs:
        for png in sorted(Path(run_dir).glob("seed_*/class_*.png")):
            target = int(png.stem.split("_")[1])
            images.append((target, load_png(png)))
    return images


def cmd_retrain(args) -> int:
    train, test = load_mnist_dir(args.data)
    spec = resolve_network(args.network)
    weights = load_weights(args.weights_file)
    baseline = evaluate_accuracy(spec, weights, test.images, test.labels)

    fooling = _load_fooling_images(args.runs)
    num_classes = spec.num_classes
    merged_train, merged_val = build_fooling_class_dataset(
        fooling, args.per_class, args.split_ratio, train, test, num_classes
    )
    extended_spec, extended = extend_final_layer(spec, weights)
    cfg = TrainConfig(
        learning_rate=args.lr,
        epochs=args.epochs,
        batch_size=args.batch_size,
        seed=args.seed,
        trainable_scope="final-layer-only",
    )
    outcome = fine_tune_final_layer(extended_spec, extended, merged_train, merged_val, cfg)
    original_val = evaluate_accuracy(extended_spec, outcome.weights, test.images, test.labels)
    save_weights(outcome.weights, _ensure_parent(args.out))
    # the extended victim is a new architecture; write its spec so
    # `attack --network <file>.json` can target the defended model
    spec_path = Path(args.out).with_suffix(".network.json")
    spec_path.write_text(extended_spec.to_json())

    report = {
        "baseline_val_accuracy": baseline,
        "original_val_accuracy_after": original_val,
        "merged_val_accuracy": outcome.history[-1].val_accuracy if outcome.history else None,
        "fooling_images": len(fooling),
        "epochs": [
            {"epoch": s.epoch, "loss": s.loss, "train": s.train_accuracy, "val": s.val_accuracy}
            for s in outcome.history
        ],
        "num_classes": num_classes + 1,
    }
    if args.report:
        _ensure_parent(args.report).write_text(json.dumps(report, indent=1))
    print(f"saved {args.out} (+ {spec_path}); original-class val accuracy "
          f"{original_val:.4f} (baseline {baseline:.4f})")
    return EXIT_OK


def cmd_metrics(args) -> int:
    rows = []
    for run_dir in args.runs:
        records = load_run_records(run_dir)
        rows.append(aggregate(records, args.threshold))
    write_aggregate_csv(_ensure_parent(args.out), rows)
    for a in rows:
        print(
            f"{a.attack},{a.classifier_id}: confidence {a.median_confidence:.4f} "
            f"ASR {a.fooling_asr:.2%} PCR {a.median_pcr:.4f} queries {a.mean_queries:.1f}"
        )
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_export(args) -> int:
    out = export_heatmap_csv(args.run, seed=args.seed, out_path=args.out)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_serve_stub(args) -> int:
    shape = _parse_ints(args.input_shape)
    if len(shape) != 3:
        raise ConfigError(f"--input-shape must be C,H,W, got {args.input_shape!r}")
    handler = UniformStubHandler(args.num_classes, shape)
    if args.stdio:
        serve_stdio(handler)
        return EXIT_OK
    server = WireServer(handler, host=args.bind, port=args.port).start()
    host, port = server.address
    print(f"listening on {host}:{port}", flush=True)
    try:
        server._accept_thread.join()
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spoofkit",
                                     description="Black-box fooling-attack toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("train", help="train a builtin victim on MNIST IDX files")
    sp.add_argument("--data", required=True, help="directory with MNIST IDX files")
    sp.add_argument("--network", default="mlp")
    sp.add_argument("--epochs", type=int, default=10)
    sp.add_argument("--lr", type=float, default=0.5)
    sp.add_argument("--batch-size", type=int, default=64)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--scope", default="all-dense", choices=("all-dense", "final-layer-only"))
    sp.add_argument("--out", required=True, help="output SPWT weight file")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("attack", help="run the greedy pixel attack per seed")
    sp.add_argument("--config", help="experiment config JSON (overrides other flags)")
    _add_oracle_flags(sp)
    sp.add_argument("--budget", type=int, default=500)
    sp.add_argument("--seeds", default="0,1,2,3,4")
    sp.add_argument("--init", default="black", choices=[m.value for m in InitMode])
    sp.add_argument("--early-stop", type=float)
    sp.add_argument("--stride", type=int, default=50)
    sp.add_argument("--targets", help="comma-separated target classes (default: all)")
    sp.add_argument("--asr-threshold", type=float)
    sp.add_argument("--out", help="run directory")
    sp.set_defaults(func=cmd_attack)

    sp = sub.add_parser("evolve", help="run MAP-Elites with direct or CPPN genomes")
    sp.add_argument("--config", help="experiment config JSON (overrides other flags)")
    _add_oracle_flags(sp)
    sp.add_argument("--encoding", default="cppn", choices=("direct", "cppn"))
    sp.add_argument("--population", type=int, default=400)
    sp.add_argument("--generations", type=int, default=5000)
    sp.add_argument("--seeds", default="0,1,2,3,4")
    sp.add_argument("--targets", help="comma-separated target classes (default: all)")
    sp.add_argument("--asr-threshold", type=float)
    sp.add_argument("--out", help="run directory")
    sp.set_defaults(func=cmd_evolve)

    sp = sub.add_parser("retrain", help="add a fooling class and fine-tune the final layer")
    sp.add_argument("--data", required=True)
    sp.add_argument("--network", default="mlp")
    sp.add_argument("--weights", dest="weights_file", required=True)
    sp.add_argument("--runs", nargs="+", required=True,
                    help="attack run directories supplying fooling PNGs")
    sp.add_argument("--per-class", type=int, default=120)
    sp.add_argument("--split-ratio", type=float, default=5 / 6)
    sp.add_argument("--epochs", type=int, default=10)
    # higher rates let the fooling class cannibalize original-class accuracy
    sp.add_argument("--lr", type=float, default=0.001)
    sp.add_argument("--batch-size", type=int, default=64)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True, help="output SPWT file for the retrained victim")
    sp.add_argument("--report", help="optional JSON report path")
    sp.set_defaults(func=cmd_retrain)

    sp = sub.add_parser("metrics", help="aggregate run records into the summary CSV")
    sp.add_argument("--runs", nargs="+", required=True)
    sp.add_argument("--threshold", type=float)
    sp.add_argument("--out", default="aggregate.csv")
    sp.set_defaults(func=cmd_metrics)

    sp = sub.add_parser("export", help="flatten a run's trajectories for heatmap plotting")
    sp.add_argument("--run", required=True)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_export)

    sp = sub.add_parser("serve-stub", help="loopback wire-protocol stub (uniform probabilities)")
    sp.add_argument("--num-classes", type=int, default=10)
    sp.add_argument("--input-shape", default="1,28,28")
    sp.add_argument("--bind", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=0)
    sp.add_argument("--stdio", action="store_true", help="serve on stdin/stdout instead of TCP")
    sp.set_defaults(func=cmd_serve_stub)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    try:
        return args.func(args)
    except (TransportError, ProtocolError) as exc:
        print(f"oracle error: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    except (ConfigError, FormatError, NotFoundError, CapacityError, TrainingScopeError,
            FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SpoofkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
