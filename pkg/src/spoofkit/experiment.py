"""Experiment orchestration: config schema, run directories, persistence, exports."""

from __future__ import annotations

import csv
import json
import os
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import network
from .errors import ConfigError, NotFoundError
from .image import InitMode, changed_location_ratio, save_png
from .mapelites import EvolutionConfig, evolve, replay_elite
from .metrics import (
    Aggregate,
    ClassOutcome,
    RunRecord,
    aggregate,
    write_aggregate_csv,
)
from .oracle import BuiltinOracle, Oracle, RemoteOracle
from .spoof import AttackConfig, spoof_batch
from .weights import load_weights

SCHEMA_VERSION = 1
OUTPUT_ROOT_ENV = "SPOOFKIT_OUTPUT_ROOT"

ATTACKS = ("spoof", "direct", "cppn")
_NAMED_NETWORKS = {
    "mlp": network.mlp_victim_spec,
    "lenet": network.lenet_spec,
}


@dataclass(frozen=True)
class ExperimentConfig:
    attack: str  # spoof | direct | cppn
    oracle: dict  # {"backend": "builtin", ...} or {"backend": "remote", ...}
    seeds: Tuple[int, ...]
    classifier_id: str = ""
    budget: Optional[int] = None  # spoof
    population_size: Optional[int] = None  # direct/cppn
    generations: Optional[int] = None
    init: InitMode = InitMode.BLACK
    early_stop_confidence: Optional[float] = None
    checkpoint_stride: int = 50
    targets: Optional[Tuple[int, ...]] = None  # default: every oracle class
    asr_threshold: Optional[float] = None
    output_dir: Optional[str] = None
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.attack not in ATTACKS:
            raise ConfigError(f"attack must be one of {ATTACKS}, got {self.attack!r}")
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {self.schema_version}")
        backend = self.oracle.get("backend")
        if backend == "builtin":
            if "network" not in self.oracle or "weights" not in self.oracle:
                raise ConfigError("builtin oracle needs 'network' and 'weights'")
        elif backend == "remote":
            has_tcp = "host" in self.oracle and "port" in self.oracle
            has_cmd = "command" in self.oracle
            if has_tcp == has_cmd:
                raise ConfigError("remote oracle needs either host+port or a command, not both")
        else:
            raise ConfigError(f"oracle backend must be 'builtin' or 'remote', got {backend!r}")
        if self.attack == "spoof":
            if self.budget is None or self.budget < 1:
                raise ConfigError("spoof requires a budget >= 1")
        else:
            if not self.population_size or not self.generations:
                raise ConfigError(f"{self.attack} requires population_size and generations")

    @property
    def label(self) -> str:
        if self.classifier_id:
            return self.classifier_id
        backend = self.oracle["backend"]
        if backend == "builtin":
            net = self.oracle["network"]
            name = net if isinstance(net, str) and net in _NAMED_NETWORKS else "custom"
            return f"builtin-{name}"
        return "remote"

    def to_json(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "attack": self.attack,
            "oracle": self.oracle,
            "seeds": list(self.seeds),
            "classifier_id": self.classifier_id,
            "budget": self.budget,
            "population_size": self.population_size,
            "generations": self.generations,
            "init": self.init.value,
            "early_stop_confidence": self.early_stop_confidence,
            "checkpoint_stride": self.checkpoint_stride,
            "targets": list(self.targets) if self.targets is not None else None,
            "asr_threshold": self.asr_threshold,
            "output_dir": self.output_dir,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentConfig":
        known = {
            "attack",
            "oracle",
            "seeds",
            "classifier_id",
            "budget",
            "population_size",
            "generations",
            "init",
            "early_stop_confidence",
            "checkpoint_stride",
            "targets",
            "asr_threshold",
            "output_dir",
            "schema_version",
        }
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        kwargs = dict(obj)
        kwargs["seeds"] = tuple(obj.get("seeds", ()))
        if obj.get("targets") is not None:
            kwargs["targets"] = tuple(obj["targets"])
        if "init" in obj:
            kwargs["init"] = InitMode.from_string(obj["init"])
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(f"malformed config: {exc}") from exc

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            obj = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_json(obj)


def resolve_network(descriptor) -> network.NetworkSpec:
    """Named spec ('mlp', 'lenet'), a parsed JSON document, or JSON text."""
    if isinstance(descriptor, str):
        if descriptor in _NAMED_NETWORKS:
            return _NAMED_NETWORKS[descriptor]()
        if not descriptor.lstrip().startswith("{"):
            raise ConfigError(
                f"unknown network {descriptor!r}; known: {sorted(_NAMED_NETWORKS)}"
            )
    return network.NetworkSpec.from_json(descriptor)


def build_oracle(cfg: ExperimentConfig) -> Oracle:
    """Instantiate the configured backend; raises before any attack query."""
    spec = cfg.oracle
    if spec["backend"] == "builtin":
        net = resolve_network(spec["network"])
        weights = load_weights(spec["weights"])
        return BuiltinOracle(net, weights)
    if "command" in spec:
        return RemoteOracle.spawn(spec["command"])
    return RemoteOracle.connect_tcp(spec["host"], int(spec["port"]), timeout=spec.get("timeout"))


def default_output_dir(cfg: ExperimentConfig) -> Path:
    root = Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))
    return root / f"{cfg.attack}_{cfg.label}"


@dataclass
class RunOutcome:
    directory: Path
    records: List[RunRecord]
    aggregate: Optional[Aggregate]
    failures: List[str] = field(default_factory=list)


def _write_trajectory_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _zeroed_runtime(record: RunRecord) -> RunRecord:
    classes = {
        c: replace(o, runtime_seconds=0.0) for c, o in record.classes.items()
    }
    return RunRecord(record.attack, record.classifier_id, record.seed, classes)


def _run_spoof_seed(oracle: Oracle, cfg: ExperimentConfig, seed: int, targets: Sequence[int],
                    seed_dir: Path) -> Tuple[RunRecord, Optional[str]]:
    configs = [
        AttackConfig(
            target_class=t,
            budget=cfg.budget,
            seed=seed,
            init=cfg.init,
            early_stop_confidence=cfg.early_stop_confidence,
            checkpoint_stride=cfg.checkpoint_stride,
        )
        for t in targets
    ]
    started = time.perf_counter()
    results = spoof_batch(oracle, configs)
    elapsed = time.perf_counter() - started
    per_class_seconds = elapsed / len(targets)

    record = RunRecord(cfg.attack, cfg.label, seed, {})
    failure = None
    rows = []
    for result in results:
        c = result.target_class
        success = bool(result.final_probs.size) and int(np.argmax(result.final_probs)) == c
        record.classes[c] = ClassOutcome(
            final_confidence=result.final_confidence,
            success=success,
            pcr=result.pcr,
            queries=result.queries_used,
            runtime_seconds=per_class_seconds,
            baseline_queries=result.baseline_queries,
        )
        save_png(result.final_image, seed_dir / f"class_{c}.png")
        rows += [(c, q, repr(conf)) for q, conf in result.trajectory]
        if result.error:
            failure = result.error
    _write_trajectory_csv(seed_dir / "trajectory.csv", ["class", "query_index", "confidence"], rows)
    _zeroed_runtime(record).save(seed_dir / "records.json")
    _write_timing(seed_dir, elapsed, per_class_seconds)
    return record, failure


def _run_evolve_seed(oracle: Oracle, cfg: ExperimentConfig, seed: int, targets: Sequence[int],
                     seed_dir: Path) -> Tuple[RunRecord, Optional[str]]:
    evo = EvolutionConfig(
        encoding=cfg.attack,
        population_size=cfg.population_size,
        generations=cfg.generations,
        seed=seed,
    )
    started = time.perf_counter()
    outcome = evolve(oracle, evo)
    elapsed = time.perf_counter() - started
    per_class_seconds = elapsed / len(targets)
    archive = outcome.archive
    archive.save(seed_dir / "archive.json")

    black = np.zeros(archive.shape, dtype=np.float32)
    per_target_queries = outcome.queries_used / oracle.num_classes
    record = RunRecord(cfg.attack, cfg.label, seed, {})
    rows = []
    for c in targets:
        elite = archive.bins[c]
        if elite is None:
            record.classes[c] = ClassOutcome(0.0, False, 0.0, per_target_queries, per_class_seconds)
        else:
            image = replay_elite(archive, c)
            save_png(image, seed_dir / f"class_{c}.png")
            record.classes[c] = ClassOutcome(
                final_confidence=elite.fitness,
                success=elite.top1 == c,
                pcr=changed_location_ratio(image, black),
                queries=per_target_queries,
                runtime_seconds=per_class_seconds,
            )
        rows += [(c, gen, q, repr(fit)) for gen, q, fit in outcome.trajectories[c]]
    _write_trajectory_csv(
        seed_dir / "trajectory.csv", ["class", "generation", "queries_so_far", "fitness"], rows
    )
    _zeroed_runtime(record).save(seed_dir / "records.json")
    _write_timing(seed_dir, elapsed, per_class_seconds)
    return record, outcome.error


def _write_timing(seed_dir: Path, wall_seconds: float, per_class_seconds: float) -> None:
    # wall-clock lives outside records.json so reruns stay byte-identical
    (seed_dir / "timing.json").write_text(
        json.dumps(
            {
                "clock": "perf_counter",
                "wall_seconds": wall_seconds,
                "per_class_wall_seconds": per_class_seconds,
            }
        )
    )


def run_experiment(cfg: ExperimentConfig, output_dir=None) -> RunOutcome:
    """Execute the configured attack once per seed and persist all artifacts.

    Layout: config.json, seed_<k>/{records.json, timing.json, trajectory.csv,
    class_<c>.png[, archive.json]}, aggregate.csv.
    """
    out = Path(output_dir) if output_dir else (
        Path(cfg.output_dir) if cfg.output_dir else default_output_dir(cfg)
    )
    oracle = build_oracle(cfg)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.json").write_text(json.dumps(cfg.to_json(), indent=1, sort_keys=True))
        targets = list(cfg.targets) if cfg.targets is not None else list(range(oracle.num_classes))

        records: List[RunRecord] = []
        failures: List[str] = []
        for seed in cfg.seeds:
            seed_dir = out / f"seed_{seed}"
            seed_dir.mkdir(exist_ok=True)
            runner = _run_spoof_seed if cfg.attack == "spoof" else _run_evolve_seed
            record, failure = runner(oracle, cfg, seed, targets, seed_dir)
            records.append(record)
            if failure:
                failures.append(f"seed {seed}: {failure}")

        agg = None
        if records and not failures:
            agg = aggregate(records, cfg.asr_threshold)
            write_aggregate_csv(out / "aggregate.csv", [agg])
        return RunOutcome(out, records, agg, failures)
    finally:
        close = getattr(oracle, "close", None)
        if callable(close):
            close()


def load_run_records(run_dir) -> List[RunRecord]:
    """Read back per-seed records, restoring wall-clock from timing.json."""
    run_dir = Path(run_dir)
    records = []
    for seed_dir in sorted(run_dir.glob("seed_*")):
        record = RunRecord.load(seed_dir / "records.json")
        timing_path = seed_dir / "timing.json"
        if timing_path.exists():
            timing = json.loads(timing_path.read_text())
            per_class = timing.get("per_class_wall_seconds", 0.0)
            for outcome in record.classes.values():
                outcome.runtime_seconds = per_class
        records.append(record)
    if not records:
        raise NotFoundError(f"no seed_*/records.json under {run_dir}")
    return records


def export_heatmap_csv(run_dir, seed: Optional[int] = None, out_path=None) -> Path:
    """Flatten one seed's trajectory into (class, checkpoint_query, confidence)
    rows, classes ascending; values are copied verbatim from trajectory.csv."""
    run_dir = Path(run_dir)
    seed_dirs = sorted(run_dir.glob("seed_*"), key=lambda p: int(p.name.split("_")[1]))
    if seed is not None:
        seed_dirs = [d for d in seed_dirs if d.name == f"seed_{seed}"]
    trajectories = [d / "trajectory.csv" for d in seed_dirs if (d / "trajectory.csv").exists()]
    if not trajectories:
        raise NotFoundError(f"no trajectory.csv under {run_dir}")
    source = trajectories[0]

    with open(source, newline="") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        query_col = "query_index" if "query_index" in fields else "queries_so_far"
        value_col = "confidence" if "confidence" in fields else "fitness"
        rows = [(int(r["class"]), int(r[query_col]), r[value_col]) for r in reader]
    rows.sort(key=lambda r: (r[0], r[1]))

    out = Path(out_path) if out_path else run_dir / f"heatmap_{source.parent.name}.csv"
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["class", "checkpoint_query", "confidence"])
        writer.writerows(rows)
    return out
