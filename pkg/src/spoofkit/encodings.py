"""Evolvable image genomes: direct pixel arrays and CPPN coordinate networks."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ConfigError
from .image import _freeze

ACTIVATIONS = ("sine", "sigmoid", "gaussian", "identity", "abs")
INPUT_NAMES = ("x", "y", "r", "bias")
NUM_INPUTS = len(INPUT_NAMES)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


_ACTIVATION_FNS = {
    "sine": np.sin,
    "sigmoid": _sigmoid,
    "gaussian": lambda x: np.exp(-np.square(x)),
    "identity": lambda x: x,
    "abs": np.abs,
}


@dataclass(frozen=True)
class NodeGene:
    id: int
    role: str  # input | hidden | output
    activation: str


@dataclass(frozen=True)
class ConnGene:
    src: int
    dst: int
    weight: float
    enabled: bool
    innovation: int


@dataclass(frozen=True)
class CppnGenome:
    """Feed-forward coordinate network: inputs (x, y, r, bias) → one output per channel."""

    nodes: Tuple[NodeGene, ...]
    connections: Tuple[ConnGene, ...]
    next_innovation: int
    next_node_id: int

    @property
    def num_outputs(self) -> int:
        return sum(1 for n in self.nodes if n.role == "output")

    def output_ids(self) -> List[int]:
        return [n.id for n in self.nodes if n.role == "output"]

    def hidden_ids(self) -> List[int]:
        return [n.id for n in self.nodes if n.role == "hidden"]


@dataclass(frozen=True)
class DirectGenome:
    """Pixels evolved in place; mutation rate decays by halving on a fixed period."""

    pixels: np.ndarray  # (C, H, W) float32 in [0, 1], read-only
    mutation_rate: float = 0.10
    rate_halving_period: float = 1000

    def __post_init__(self):
        if not (0.0 <= self.mutation_rate <= 1.0):
            raise ConfigError(f"mutation_rate must be in [0, 1], got {self.mutation_rate}")
        if self.rate_halving_period <= 0:
            raise ConfigError(f"rate_halving_period must be > 0, got {self.rate_halving_period}")


@dataclass(frozen=True)
class MutationParams:
    weight_perturb_prob: float = 0.8
    weight_sigma: float = 0.5
    add_connection_prob: float = 0.05
    add_node_prob: float = 0.03
    toggle_enable_prob: float = 0.01
    activation_swap_prob: float = 0.05

    def __post_init__(self):
        for name in (
            "weight_perturb_prob",
            "add_connection_prob",
            "add_node_prob",
            "toggle_enable_prob",
            "activation_swap_prob",
        ):
            p = getattr(self, name)
            if not (0.0 <= p <= 1.0):
                raise ConfigError(f"{name} must be in [0, 1], got {p}")
        if self.weight_sigma < 0:
            raise ConfigError(f"weight_sigma must be >= 0, got {self.weight_sigma}")


def topological_order(genome: CppnGenome) -> List[int]:
    """Kahn's algorithm over all connections, enabled or not; ties broken by
    node id so evaluation order is a pure function of the genome.

    Raises ValueError on a cycle.
    """
    ids = [n.id for n in genome.nodes]
    indegree = {i: 0 for i in ids}
    outgoing: Dict[int, List[int]] = {i: [] for i in ids}
    for conn in genome.connections:
        indegree[conn.dst] += 1
        outgoing[conn.src].append(conn.dst)
    ready = sorted(i for i in ids if indegree[i] == 0)
    order: List[int] = []
    while ready:
        node = ready.pop(0)
        order.append(node)
        changed = False
        for dst in outgoing[node]:
            indegree[dst] -= 1
            if indegree[dst] == 0:
                ready.append(dst)
                changed = True
        if changed:
            ready.sort()
    if len(order) != len(ids):
        raise ValueError("genome contains a cycle")
    return order


def validate_cppn(genome: CppnGenome) -> None:
    """Structural checks: roles, unique ids/innovations, edge endpoints, acyclicity."""
    ids = [n.id for n in genome.nodes]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate node ids")
    roles = {n.id: n.role for n in genome.nodes}
    inputs = [n for n in genome.nodes if n.role == "input"]
    if len(inputs) != NUM_INPUTS:
        raise ValueError(f"expected {NUM_INPUTS} input nodes, got {len(inputs)}")
    if genome.num_outputs < 1:
        raise ValueError("genome needs at least one output node")
    for node in genome.nodes:
        if node.role not in ("input", "hidden", "output"):
            raise ValueError(f"node {node.id}: unknown role {node.role!r}")
        if node.role != "input" and node.activation not in ACTIVATIONS:
            raise ValueError(f"node {node.id}: unknown activation {node.activation!r}")
    innovations = [c.innovation for c in genome.connections]
    if len(set(innovations)) != len(innovations):
        raise ValueError("duplicate innovation numbers")
    if innovations and max(innovations) >= genome.next_innovation:
        raise ValueError("next_innovation must exceed every existing innovation number")
    pairs = set()
    for conn in genome.connections:
        if conn.src not in roles or conn.dst not in roles:
            raise ValueError(f"connection {conn.src}->{conn.dst} references a missing node")
        if roles[conn.dst] == "input":
            raise ValueError(f"connection {conn.src}->{conn.dst} targets an input node")
        if roles[conn.src] == "output":
            raise ValueError(f"connection {conn.src}->{conn.dst} leaves an output node")
        if (conn.src, conn.dst) in pairs:
            raise ValueError(f"duplicate connection {conn.src}->{conn.dst}")
        pairs.add((conn.src, conn.dst))
    topological_order(genome)


def coordinate_grids(height: int, width: int):
    """x spans [-1, 1] across columns, y across rows, r is the radial distance."""
    x = np.linspace(-1.0, 1.0, width, dtype=np.float64)[None, :].repeat(height, axis=0)
    y = np.linspace(-1.0, 1.0, height, dtype=np.float64)[:, None].repeat(width, axis=1)
    r = np.sqrt(x * x + y * y)
    bias = np.ones((height, width), dtype=np.float64)
    return x, y, r, bias


def render_cppn(genome: CppnGenome, height: int, width: int, channels: int) -> np.ndarray:
    """Evaluate the network at every pixel coordinate; outputs pass through a
    sigmoid so the rendered image lands in [0, 1]."""
    if genome.num_outputs != channels:
        raise ValueError(f"genome has {genome.num_outputs} outputs, need {channels}")
    order = topological_order(genome)
    grids = coordinate_grids(height, width)
    input_ids = [n.id for n in genome.nodes if n.role == "input"]
    values: Dict[int, np.ndarray] = dict(zip(input_ids, grids))
    activation_of = {n.id: n.activation for n in genome.nodes}
    role_of = {n.id: n.role for n in genome.nodes}
    incoming: Dict[int, List[ConnGene]] = {}
    for conn in genome.connections:
        if conn.enabled:
            incoming.setdefault(conn.dst, []).append(conn)
    for node_id in order:
        if role_of[node_id] == "input":
            continue
        total = np.zeros((height, width), dtype=np.float64)
        for conn in incoming.get(node_id, ()):
            total += conn.weight * values[conn.src]
        fn = _ACTIVATION_FNS[activation_of[node_id]]
        values[node_id] = _sigmoid(total) if role_of[node_id] == "output" else fn(total)
    planes = [values[i] for i in genome.output_ids()]
    return _freeze(np.stack(planes).astype(np.float32))


def render(genome: Union[CppnGenome, DirectGenome], height: int, width: int, channels: int) -> np.ndarray:
    if isinstance(genome, DirectGenome):
        if genome.pixels.shape != (channels, height, width):
            raise ValueError(
                f"direct genome shape {genome.pixels.shape} != {(channels, height, width)}"
            )
        return genome.pixels
    return render_cppn(genome, height, width, channels)


def random_genome(
    kind: str,
    shape: Tuple[int, int, int],
    rng: np.random.Generator,
    *,
    mutation_rate: float = 0.10,
    rate_halving_period: float = 1000,
) -> Union[CppnGenome, DirectGenome]:
    channels, height, width = shape
    if kind == "direct":
        pixels = _freeze(rng.random((channels, height, width), dtype=np.float32))
        return DirectGenome(pixels, mutation_rate, rate_halving_period)
    if kind == "cppn":
        nodes = [NodeGene(i, "input", "identity") for i in range(NUM_INPUTS)]
        nodes += [NodeGene(NUM_INPUTS + k, "output", "sigmoid") for k in range(channels)]
        connections = []
        innovation = 0
        for k in range(channels):
            for src in range(NUM_INPUTS):
                weight = float(rng.normal(0.0, 1.0))
                connections.append(ConnGene(src, NUM_INPUTS + k, weight, True, innovation))
                innovation += 1
        return CppnGenome(
            nodes=tuple(nodes),
            connections=tuple(connections),
            next_innovation=innovation,
            next_node_id=NUM_INPUTS + channels,
        )
    raise ConfigError(f"unknown encoding kind {kind!r}")


def mutate_direct(genome: DirectGenome, generation: int, rng: np.random.Generator) -> DirectGenome:
    """Resample each element from U(0,1) with the generation-decayed rate."""
    rate = genome.mutation_rate * 0.5 ** float(generation // genome.rate_halving_period)
    shape = genome.pixels.shape
    mask = rng.random(shape) < rate
    fresh = rng.random(shape, dtype=np.float32)
    pixels = _freeze(np.where(mask, fresh, genome.pixels))
    return replace(genome, pixels=pixels)


def _path_exists(genome: CppnGenome, start: int, goal: int) -> bool:
    outgoing: Dict[int, List[int]] = {}
    for conn in genome.connections:
        outgoing.setdefault(conn.src, []).append(conn.dst)
    stack, seen = [start], set()
    while stack:
        node = stack.pop()
        if node == goal:
            return True
        if node in seen:
            continue
        seen.add(node)
        stack.extend(outgoing.get(node, ()))
    return False


def mutate_cppn(
    genome: CppnGenome, params: MutationParams, rng: np.random.Generator
) -> CppnGenome:
    """Apply the NEAT-style operators in a fixed draw order: per-connection
    weight perturbation, add-connection, add-node split, enable toggle,
    hidden-activation swap. Operators that cannot apply are skipped."""
    nodes = list(genome.nodes)
    connections = list(genome.connections)
    next_innovation = genome.next_innovation
    next_node_id = genome.next_node_id

    for i, conn in enumerate(connections):
        if rng.random() < params.weight_perturb_prob:
            delta = float(rng.normal(0.0, params.weight_sigma))
            connections[i] = replace(conn, weight=conn.weight + delta)

    if rng.random() < params.add_connection_prob:
        role_of = {n.id: n.role for n in nodes}
        existing = {(c.src, c.dst) for c in connections}
        working = replace(genome, connections=tuple(connections))
        candidates = []
        for src in sorted(n.id for n in nodes if role_of[n.id] != "output"):
            for dst in sorted(n.id for n in nodes if role_of[n.id] != "input"):
                if src == dst or (src, dst) in existing:
                    continue
                if _path_exists(working, dst, src):
                    continue  # would close a cycle
                candidates.append((src, dst))
        if candidates:
            src, dst = candidates[int(rng.integers(len(candidates)))]
            weight = float(rng.normal(0.0, 1.0))
            connections.append(ConnGene(src, dst, weight, True, next_innovation))
            next_innovation += 1

    if rng.random() < params.add_node_prob:
        enabled_idx = [i for i, c in enumerate(connections) if c.enabled]
        if enabled_idx:
            idx = enabled_idx[int(rng.integers(len(enabled_idx)))]
            old = connections[idx]
            activation = ACTIVATIONS[int(rng.integers(len(ACTIVATIONS)))]
            new_id = next_node_id
            next_node_id += 1
            nodes.append(NodeGene(new_id, "hidden", activation))
            connections[idx] = replace(old, enabled=False)
            connections.append(ConnGene(old.src, new_id, 1.0, True, next_innovation))
            connections.append(ConnGene(new_id, old.dst, old.weight, True, next_innovation + 1))
            next_innovation += 2

    if rng.random() < params.toggle_enable_prob and connections:
        idx = int(rng.integers(len(connections)))
        connections[idx] = replace(connections[idx], enabled=not connections[idx].enabled)

    if rng.random() < params.activation_swap_prob:
        hidden_idx = [i for i, n in enumerate(nodes) if n.role == "hidden"]
        if hidden_idx:
            idx = hidden_idx[int(rng.integers(len(hidden_idx)))]
            activation = ACTIVATIONS[int(rng.integers(len(ACTIVATIONS)))]
            nodes[idx] = replace(nodes[idx], activation=activation)

    return CppnGenome(
        nodes=tuple(nodes),
        connections=tuple(connections),
        next_innovation=next_innovation,
        next_node_id=next_node_id,
    )


def genome_to_json(genome: Union[CppnGenome, DirectGenome]) -> dict:
    if isinstance(genome, DirectGenome):
        return {
            "kind": "direct",
            "shape": list(genome.pixels.shape),
            "pixels": [float(v) for v in genome.pixels.ravel()],
            "mutation_rate": genome.mutation_rate,
            "rate_halving_period": genome.rate_halving_period,
        }
    return {
        "kind": "cppn",
        "nodes": [{"id": n.id, "role": n.role, "activation": n.activation} for n in genome.nodes],
        "connections": [
            {
                "src": c.src,
                "dst": c.dst,
                "weight": c.weight,
                "enabled": c.enabled,
                "innovation": c.innovation,
            }
            for c in genome.connections
        ],
        "next_innovation": genome.next_innovation,
        "next_node_id": genome.next_node_id,
    }


def genome_from_json(obj: dict) -> Union[CppnGenome, DirectGenome]:
    kind = obj.get("kind")
    if kind == "direct":
        shape = tuple(obj["shape"])
        pixels = _freeze(np.asarray(obj["pixels"], dtype=np.float32).reshape(shape))
        return DirectGenome(pixels, obj["mutation_rate"], obj["rate_halving_period"])
    if kind == "cppn":
        nodes = tuple(NodeGene(n["id"], n["role"], n["activation"]) for n in obj["nodes"])
        connections = tuple(
            ConnGene(c["src"], c["dst"], c["weight"], c["enabled"], c["innovation"])
            for c in obj["connections"]
        )
        genome = CppnGenome(nodes, connections, obj["next_innovation"], obj["next_node_id"])
        validate_cppn(genome)
        return genome
    raise ConfigError(f"unknown genome kind {kind!r}")
