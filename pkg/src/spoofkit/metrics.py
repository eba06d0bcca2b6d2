"""The five evaluation metrics, their per-class records, and aggregation."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np


@dataclass
class ClassOutcome:
    final_confidence: float
    success: bool  # top-1 prediction equals the target class
    pcr: float
    queries: float
    runtime_seconds: float
    baseline_queries: int = 0


@dataclass
class RunRecord:
    attack: str  # spoof | direct | cppn
    classifier_id: str
    seed: int
    classes: Dict[int, ClassOutcome] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "attack": self.attack,
            "classifier_id": self.classifier_id,
            "seed": self.seed,
            "classes": {
                str(c): {
                    "final_confidence": o.final_confidence,
                    "success": o.success,
                    "pcr": o.pcr,
                    "queries": o.queries,
                    "runtime_seconds": o.runtime_seconds,
                    "baseline_queries": o.baseline_queries,
                }
                for c, o in sorted(self.classes.items())
            },
        }

    @classmethod
    def from_json(cls, obj: dict) -> "RunRecord":
        classes = {
            int(c): ClassOutcome(
                final_confidence=e["final_confidence"],
                success=e["success"],
                pcr=e["pcr"],
                queries=e["queries"],
                runtime_seconds=e["runtime_seconds"],
                baseline_queries=e.get("baseline_queries", 0),
            )
            for c, e in obj["classes"].items()
        }
        return cls(obj["attack"], obj["classifier_id"], obj["seed"], classes)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1, sort_keys=True))

    @classmethod
    def load(cls, path) -> "RunRecord":
        return cls.from_json(json.loads(Path(path).read_text()))


@dataclass
class Aggregate:
    attack: str
    classifier_id: str
    num_classes: int
    num_seeds: int
    fooling_asr: float
    median_confidence: float
    mean_confidence: float
    median_pcr: float
    mean_pcr: float
    median_queries: float
    mean_queries: float
    median_runtime_seconds: float
    mean_runtime_seconds: float


def fooling_asr(records: Sequence[RunRecord], threshold: Optional[float] = None) -> float:
    """Fraction of (class, seed) outcomes whose top-1 matched the target; an
    optional confidence threshold tightens the success rule."""
    outcomes = [o for r in records for o in r.classes.values()]
    if not outcomes:
        raise ValueError("fooling_asr requires at least one per-class outcome")
    hits = sum(
        1
        for o in outcomes
        if o.success and (threshold is None or o.final_confidence >= threshold)
    )
    return hits / len(outcomes)


def _check_consistent(records: Sequence[RunRecord]) -> None:
    if not records:
        raise ValueError("aggregate requires at least one record")
    first = records[0]
    class_set = set(first.classes)
    for r in records[1:]:
        if r.attack != first.attack or r.classifier_id != first.classifier_id:
            raise ValueError("records mix different attacks or classifiers")
        if set(r.classes) != class_set:
            raise ValueError("records cover different class sets")


def aggregate(records: Sequence[RunRecord], threshold: Optional[float] = None) -> Aggregate:
    """Pool each metric per class by averaging over seeds, then take the
    median (headline) and mean (supplementary) across classes."""
    _check_consistent(records)
    classes = sorted(records[0].classes)

    def per_class(metric: str) -> np.ndarray:
        return np.array(
            [np.mean([getattr(r.classes[c], metric) for r in records]) for c in classes]
        )

    confidence = per_class("final_confidence")
    pcr = per_class("pcr")
    queries = per_class("queries")
    runtime = per_class("runtime_seconds")
    return Aggregate(
        attack=records[0].attack,
        classifier_id=records[0].classifier_id,
        num_classes=len(classes),
        num_seeds=len(records),
        fooling_asr=fooling_asr(records, threshold),
        median_confidence=float(np.median(confidence)),
        mean_confidence=float(np.mean(confidence)),
        median_pcr=float(np.median(pcr)),
        mean_pcr=float(np.mean(pcr)),
        median_queries=float(np.median(queries)),
        mean_queries=float(np.mean(queries)),
        median_runtime_seconds=float(np.median(runtime)),
        mean_runtime_seconds=float(np.mean(runtime)),
    )


def queries_per_target(oracle_counter_delta: float, num_classes: int) -> float:
    if num_classes < 1:
        raise ValueError(f"num_classes must be >= 1, got {num_classes}")
    return oracle_counter_delta / num_classes


AGGREGATE_CSV_COLUMNS = [
    "attack",
    "classifier",
    "runtime_hours",
    "confidence_pct",
    "fooling_asr_pct",
    "pcr_pct",
    "queries_per_target",
    "mean_confidence_pct",
    "mean_pcr_pct",
]


def write_aggregate_csv(path, aggregates: Sequence[Aggregate]) -> None:
    """One row per attack×classifier; headline columns are medians, the
    trailing columns carry the supplementary means."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(AGGREGATE_CSV_COLUMNS)
        for a in aggregates:
            writer.writerow(
                [
                    a.attack,
                    a.classifier_id,
                    repr(a.median_runtime_seconds / 3600.0),
                    repr(a.median_confidence * 100.0),
                    repr(a.fooling_asr * 100.0),
                    repr(a.median_pcr * 100.0),
                    repr(a.mean_queries),
                    repr(a.mean_confidence * 100.0),
                    repr(a.mean_pcr * 100.0),
                ]
            )


def read_aggregate_csv(path) -> List[dict]:
    with open(path, newline="") as fh:
        return [dict(row) for row in csv.DictReader(fh)]
