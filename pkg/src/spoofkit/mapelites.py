"""MAP-Elites loop with one bin per target class, driving both image encodings."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from .encodings import (
    CppnGenome,
    DirectGenome,
    MutationParams,
    genome_from_json,
    genome_to_json,
    mutate_cppn,
    mutate_direct,
    random_genome,
    render,
)
from .errors import ConfigError, NotFoundError, ProtocolError, TransportError
from .oracle import Oracle

Genome = Union[CppnGenome, DirectGenome]


@dataclass
class EliteBin:
    genome: Genome
    fitness: float
    found_at_generation: int
    top1: int


@dataclass
class Archive:
    num_classes: int
    shape: Tuple[int, int, int]
    encoding: str
    bins: List[Optional[EliteBin]]

    def filled_classes(self) -> List[int]:
        return [c for c, b in enumerate(self.bins) if b is not None]

    def to_json(self) -> dict:
        return {
            "num_classes": self.num_classes,
            "shape": list(self.shape),
            "encoding": self.encoding,
            "bins": {
                str(c): {
                    "fitness": b.fitness,
                    "found_at_generation": b.found_at_generation,
                    "top1": b.top1,
                    "genome": genome_to_json(b.genome),
                }
                for c, b in enumerate(self.bins)
                if b is not None
            },
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Archive":
        num_classes = obj["num_classes"]
        bins: List[Optional[EliteBin]] = [None] * num_classes
        for key, entry in obj["bins"].items():
            bins[int(key)] = EliteBin(
                genome=genome_from_json(entry["genome"]),
                fitness=entry["fitness"],
                found_at_generation=entry["found_at_generation"],
                top1=entry["top1"],
            )
        return cls(num_classes, tuple(obj["shape"]), obj["encoding"], bins)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1, sort_keys=True))

    @classmethod
    def load(cls, path) -> "Archive":
        return cls.from_json(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class EvolutionConfig:
    encoding: str  # direct | cppn
    population_size: int
    generations: int
    seed: int
    shape: Optional[Tuple[int, int, int]] = None  # defaults to the oracle's input shape
    mutation: MutationParams = field(default_factory=MutationParams)
    direct_mutation_rate: float = 0.10
    direct_rate_halving_period: float = 1000

    def __post_init__(self):
        if self.encoding not in ("direct", "cppn"):
            raise ConfigError(f"encoding must be 'direct' or 'cppn', got {self.encoding!r}")
        if self.population_size < 1:
            raise ConfigError(f"population_size must be >= 1, got {self.population_size}")
        if self.generations < 1:
            raise ConfigError(f"generations must be >= 1, got {self.generations}")

    @property
    def checkpoint_stride(self) -> int:
        return max(1, self.generations // 1000)


TrajectoryPoint = Tuple[int, int, float]  # (generation, queries_so_far, fitness)


@dataclass
class EvolutionResult:
    archive: Archive
    trajectories: Dict[int, List[TrajectoryPoint]]
    queries_used: int
    error: Optional[str] = None


def evolve(oracle: Oracle, cfg: EvolutionConfig) -> EvolutionResult:
    """Run the archive loop: generation 0 evaluates a random population, later
    generations mutate parents drawn uniformly from filled bins; every
    offspring's probability vector competes for every class bin (strict >)."""
    shape = cfg.shape if cfg.shape is not None else oracle.input_shape
    if tuple(shape) != oracle.input_shape:
        raise ConfigError(f"configured shape {shape} != oracle input shape {oracle.input_shape}")
    channels, height, width = shape
    n = oracle.num_classes
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed]))
    archive = Archive(n, tuple(shape), cfg.encoding, [None] * n)
    trajectories: Dict[int, List[TrajectoryPoint]] = {c: [] for c in range(n)}
    queries = 0
    error: Optional[str] = None

    def spawn_offspring(generation: int) -> List[Genome]:
        if generation == 0:
            return [
                random_genome(
                    cfg.encoding,
                    shape,
                    rng,
                    mutation_rate=cfg.direct_mutation_rate,
                    rate_halving_period=cfg.direct_rate_halving_period,
                )
                for _ in range(cfg.population_size)
            ]
        filled = archive.filled_classes()
        offspring = []
        for _ in range(cfg.population_size):
            parent = archive.bins[filled[int(rng.integers(len(filled)))]].genome
            if cfg.encoding == "direct":
                offspring.append(mutate_direct(parent, generation, rng))
            else:
                offspring.append(mutate_cppn(parent, cfg.mutation, rng))
        return offspring

    def checkpoint(generation: int) -> None:
        for c in range(n):
            fitness = archive.bins[c].fitness if archive.bins[c] is not None else 0.0
            trajectories[c].append((generation, queries, fitness))

    for generation in range(cfg.generations):
        offspring = spawn_offspring(generation)
        images = np.stack([render(g, height, width, channels) for g in offspring])
        try:
            probs = oracle.predict(images)
        except (TransportError, ProtocolError) as exc:
            error = str(exc)
            break
        queries += len(offspring)
        for genome, row in zip(offspring, probs):
            top1 = int(np.argmax(row))
            for c in range(n):
                fitness = float(row[c])
                current = archive.bins[c]
                if current is None or fitness > current.fitness:
                    archive.bins[c] = EliteBin(genome, fitness, generation, top1)
        if generation % cfg.checkpoint_stride == 0 or generation == cfg.generations - 1:
            checkpoint(generation)

    return EvolutionResult(archive, trajectories, queries, error)


def replay_elite(archive: Archive, class_index: int) -> np.ndarray:
    """Render the stored elite for one class bin."""
    if not (0 <= class_index < archive.num_classes) or archive.bins[class_index] is None:
        raise NotFoundError(f"no elite stored for class {class_index}")
    channels, height, width = archive.shape
    return render(archive.bins[class_index].genome, height, width, channels)
