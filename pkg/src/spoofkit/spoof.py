"""Greedy single-pixel hill climbing, its batched multi-target runner, and
the canvas-initialization ablation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, ProtocolError, TransportError
from .image import (
    InitMode,
    PixelProposal,
    apply_proposal,
    changed_location_ratio,
    new_canvas,
)
from .oracle import Oracle


@dataclass(frozen=True)
class AttackConfig:
    target_class: int
    budget: int
    seed: int
    init: InitMode = InitMode.BLACK
    early_stop_confidence: Optional[float] = None
    checkpoint_stride: int = 50

    def __post_init__(self):
        if self.budget < 1:
            raise ConfigError(f"budget must be >= 1, got {self.budget}")
        if self.target_class < 0:
            raise ConfigError(f"target_class must be >= 0, got {self.target_class}")
        if self.checkpoint_stride < 1:
            raise ConfigError(f"checkpoint_stride must be >= 1, got {self.checkpoint_stride}")
        if self.early_stop_confidence is not None and not (0.0 < self.early_stop_confidence <= 1.0):
            raise ConfigError(
                f"early_stop_confidence must be in (0, 1], got {self.early_stop_confidence}"
            )


@dataclass
class AttackResult:
    target_class: int
    final_image: np.ndarray
    pixel_changes_accepted: int
    queries_used: int
    baseline_queries: int
    trajectory: List[Tuple[int, float]]
    final_confidence: float
    final_probs: np.ndarray
    pcr: float
    accepted: List[Tuple[int, PixelProposal]] = field(default_factory=list)
    error: Optional[str] = None


def _class_rngs(seed: int, target_class: int):
    """Independent (canvas, proposal) streams per (seed, class).

    Spawned from one per-class SeedSequence so the canvas draw never shifts
    the proposal sequence, and no class's stream depends on which other
    classes run alongside it.
    """
    init_seq, proposal_seq = np.random.SeedSequence([seed, target_class]).spawn(2)
    return init_seq, np.random.default_rng(proposal_seq)


class _Climber:
    """Stepper for one target class; shared by the serial and batched paths."""

    def __init__(self, input_shape: Tuple[int, int, int], cfg: AttackConfig):
        c, h, w = input_shape
        init_seq, self.rng = _class_rngs(cfg.seed, cfg.target_class)
        self.cfg = cfg
        self.initial = new_canvas(c, h, w, cfg.init, rng_seed=init_seq)
        self.image = self.initial
        self.shape = (c, h, w)
        self.confidence = 0.0
        self.last_probs: Optional[np.ndarray] = None
        self.pixel_changes = 0
        self.queries_used = 0
        self.baseline_queries = 0
        self.trajectory: List[Tuple[int, float]] = []
        self.accepted: List[Tuple[int, PixelProposal]] = []
        self.stopped = False
        self.error: Optional[str] = None
        self._pending: Optional[Tuple[PixelProposal, np.ndarray]] = None

    def _check_early_stop(self) -> None:
        threshold = self.cfg.early_stop_confidence
        if threshold is not None and self.confidence >= threshold:
            self.stopped = True

    def set_baseline(self, probs: np.ndarray) -> None:
        self.baseline_queries += 1
        self.last_probs = np.array(probs)
        self.confidence = float(probs[self.cfg.target_class])
        self.trajectory.append((0, self.confidence))
        self._check_early_stop()

    @property
    def active(self) -> bool:
        return not self.stopped and self.error is None and self.queries_used < self.cfg.budget

    def propose(self) -> np.ndarray:
        c, h, w = self.shape
        row = int(self.rng.integers(h))
        col = int(self.rng.integers(w))
        channel = int(self.rng.integers(c))
        value = float(self.rng.random())
        proposal = PixelProposal(row, col, channel, value)
        candidate = apply_proposal(self.image, proposal)
        self._pending = (proposal, candidate)
        return candidate

    def decide(self, probs: np.ndarray) -> None:
        proposal, candidate = self._pending
        self._pending = None
        self.queries_used += 1
        confidence = float(probs[self.cfg.target_class])
        if confidence > self.confidence:
            self.image = candidate
            self.confidence = confidence
            self.last_probs = np.array(probs)
            self.pixel_changes += 1
            self.accepted.append((self.queries_used, proposal))
        if self.queries_used % self.cfg.checkpoint_stride == 0:
            self.trajectory.append((self.queries_used, self.confidence))
        self._check_early_stop()

    def finalize(self) -> AttackResult:
        if not self.trajectory or self.trajectory[-1][0] != self.queries_used:
            self.trajectory.append((self.queries_used, self.confidence))
        return AttackResult(
            target_class=self.cfg.target_class,
            final_image=self.image,
            pixel_changes_accepted=self.pixel_changes,
            queries_used=self.queries_used,
            baseline_queries=self.baseline_queries,
            trajectory=self.trajectory,
            final_confidence=self.confidence,
            final_probs=self.last_probs if self.last_probs is not None else np.array([]),
            pcr=changed_location_ratio(self.image, self.initial),
            accepted=self.accepted,
            error=self.error,
        )


def _validate_target(oracle: Oracle, cfg: AttackConfig) -> None:
    if cfg.target_class >= oracle.num_classes:
        raise ConfigError(
            f"target_class {cfg.target_class} out of range for {oracle.num_classes} classes"
        )


def spoof_attack(oracle: Oracle, cfg: AttackConfig) -> AttackResult:
    """Hill-climb one target: start from the configured canvas, then per query
    overwrite one uniformly chosen element with v ~ U(0,1) and keep the change
    iff the target-class probability strictly improves."""
    _validate_target(oracle, cfg)
    climber = _Climber(oracle.input_shape, cfg)
    try:
        climber.set_baseline(oracle.predict_one(climber.image))
        while climber.active:
            candidate = climber.propose()
            climber.decide(oracle.predict_one(candidate))
    except (TransportError, ProtocolError) as exc:
        climber.error = str(exc)
    return climber.finalize()


def spoof_batch(oracle: Oracle, configs: Sequence[AttackConfig]) -> List[AttackResult]:
    """Run one climber per target with all candidates evaluated in a single
    batched predict per step. Results are bit-identical to the serial path
    because every climber owns its RNG stream and the engine scores images
    independently."""
    if not configs:
        raise ConfigError("spoof_batch requires at least one AttackConfig")
    targets = [cfg.target_class for cfg in configs]
    if len(set(targets)) != len(targets):
        raise ConfigError(f"duplicate target classes: {targets}")
    budgets = {cfg.budget for cfg in configs}
    if len(budgets) != 1:
        raise ConfigError(f"all configs must share one budget, got {sorted(budgets)}")
    for cfg in configs:
        _validate_target(oracle, cfg)

    climbers = [_Climber(oracle.input_shape, cfg) for cfg in configs]
    try:
        baseline = oracle.predict(np.stack([cl.image for cl in climbers]))
        for climber, probs in zip(climbers, baseline):
            climber.set_baseline(probs)
        while True:
            active = [cl for cl in climbers if cl.active]
            if not active:
                break
            candidates = np.stack([cl.propose() for cl in active])
            probs = oracle.predict(candidates)
            for climber, row in zip(active, probs):
                climber.decide(row)
    except (TransportError, ProtocolError) as exc:
        for climber in climbers:
            if climber.active or climber.baseline_queries == 0:
                climber.error = str(exc)
    return [cl.finalize() for cl in climbers]


def replay_accepted(result: AttackResult, initial: np.ndarray) -> np.ndarray:
    """Re-apply the accepted proposal list to the initial canvas."""
    image = initial
    for _, proposal in result.accepted:
        image = apply_proposal(image, proposal)
    return image


def init_ablation(
    oracle: Oracle,
    budget: int,
    seeds: Sequence[int],
    targets: Optional[Sequence[int]] = None,
    checkpoint_stride: int = 50,
) -> Dict[str, List[Tuple[int, float]]]:
    """Run the batched attack under each canvas initialization and return the
    median-confidence trajectory per mode, pooled over classes and seeds.

    Identical seeds are reused across modes, so only the starting canvas
    differs between the three trajectories.
    """
    if budget < 1:
        raise ConfigError(f"budget must be >= 1, got {budget}")
    if not seeds:
        raise ConfigError("at least one seed required")
    if targets is None:
        targets = range(oracle.num_classes)
    summaries: Dict[str, List[Tuple[int, float]]] = {}
    for mode in (InitMode.BLACK, InitMode.WHITE, InitMode.UNIFORM_RANDOM):
        per_checkpoint: Dict[int, List[float]] = {}
        for seed in seeds:
            configs = [
                AttackConfig(
                    target_class=t,
                    budget=budget,
                    seed=seed,
                    init=mode,
                    checkpoint_stride=checkpoint_stride,
                )
                for t in targets
            ]
            for result in spoof_batch(oracle, configs):
                for query_index, confidence in result.trajectory:
                    per_checkpoint.setdefault(query_index, []).append(confidence)
        summaries[mode.value] = [
            (q, float(np.median(per_checkpoint[q]))) for q in sorted(per_checkpoint)
        ]
    return summaries
