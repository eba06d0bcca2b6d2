"""Minimal feed-forward inference engine backing the builtin oracle.

Supported layers: dense, conv2d (valid cross-correlation with optional
zero padding), maxpool, relu, flatten, softmax. Batches are evaluated one
sample at a time so results are bit-identical regardless of how queries
are batched (BLAS kernels may otherwise vary with the batch dimension).

Weight conventions:
  dense   layer{i}.weight (in, out), layer{i}.bias (out,); y = x @ W + b
  conv2d  layer{i}.weight (out_ch, in_ch, k, k), layer{i}.bias (out_ch,)
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigError


@dataclass(frozen=True)
class Dense:
    in_features: int
    out_features: int


@dataclass(frozen=True)
class Conv2d:
    in_channels: int
    out_channels: int
    kernel: int
    stride: int = 1
    padding: int = 0


@dataclass(frozen=True)
class MaxPool:
    kernel: int
    stride: int


@dataclass(frozen=True)
class Relu:
    pass


@dataclass(frozen=True)
class Flatten:
    pass


@dataclass(frozen=True)
class Softmax:
    pass


Layer = Union[Dense, Conv2d, MaxPool, Relu, Flatten, Softmax]

_LAYER_KINDS = {
    "dense": Dense, "conv2d": Conv2d, "maxpool": MaxPool,
    "relu": Relu, "flatten": Flatten, "softmax": Softmax,
}


@dataclass(frozen=True)
class NetworkSpec:
    """Layer stack plus the (C, H, W) input shape it expects."""

    input_shape: tuple[int, int, int]
    layers: tuple[Layer, ...]

    def output_shapes(self) -> list[tuple[int, ...]]:
        """Propagate shapes through the stack, validating composition."""
        shape: tuple[int, ...] = tuple(self.input_shape)
        shapes = []
        for idx, layer in enumerate(self.layers):
            if isinstance(layer, Dense):
                if len(shape) != 1:
                    raise ConfigError(f"layer {idx} (dense) needs a flat input, "
                                      f"got shape {shape}; insert a flatten layer")
                if shape[0] != layer.in_features:
                    raise ConfigError(f"layer {idx} (dense) expects {layer.in_features} "
                                      f"features, got {shape[0]}")
                shape = (layer.out_features,)
            elif isinstance(layer, Conv2d):
                if len(shape) != 3:
                    raise ConfigError(f"layer {idx} (conv2d) needs a (C, H, W) input, "
                                      f"got shape {shape}")
                c, h, w = shape
                if c != layer.in_channels:
                    raise ConfigError(f"layer {idx} (conv2d) expects {layer.in_channels} "
                                      f"channels, got {c}")
                h_out = (h + 2 * layer.padding - layer.kernel) // layer.stride + 1
                w_out = (w + 2 * layer.padding - layer.kernel) // layer.stride + 1
                if h_out < 1 or w_out < 1:
                    raise ConfigError(f"layer {idx} (conv2d) output would be empty "
                                      f"for input {shape}")
                shape = (layer.out_channels, h_out, w_out)
            elif isinstance(layer, MaxPool):
                if len(shape) != 3:
                    raise ConfigError(f"layer {idx} (maxpool) needs a (C, H, W) input")
                c, h, w = shape
                h_out = (h - layer.kernel) // layer.stride + 1
                w_out = (w - layer.kernel) // layer.stride + 1
                if h_out < 1 or w_out < 1:
                    raise ConfigError(f"layer {idx} (maxpool) output would be empty")
                shape = (c, h_out, w_out)
            elif isinstance(layer, Flatten):
                shape = (int(np.prod(shape)),)
            elif isinstance(layer, (Relu, Softmax)):
                pass
            else:
                raise ConfigError(f"unknown layer type {layer!r}")
            shapes.append(shape)
        return shapes

    @property
    def num_classes(self) -> int:
        shapes = self.output_shapes()
        if not self.layers or not isinstance(self.layers[-1], Softmax):
            raise ConfigError("network must end with a softmax layer")
        final = shapes[-1]
        if len(final) != 1:
            raise ConfigError(f"softmax output must be flat, got shape {final}")
        return final[0]

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        """Names and shapes of every weight tensor, keyed by layer index."""
        params: dict[str, tuple[int, ...]] = {}
        for idx, layer in enumerate(self.layers):
            if isinstance(layer, Dense):
                params[f"layer{idx}.weight"] = (layer.in_features, layer.out_features)
                params[f"layer{idx}.bias"] = (layer.out_features,)
            elif isinstance(layer, Conv2d):
                params[f"layer{idx}.weight"] = (layer.out_channels, layer.in_channels,
                                                layer.kernel, layer.kernel)
                params[f"layer{idx}.bias"] = (layer.out_channels,)
        return params

    def to_json(self) -> str:
        entries = []
        for layer in self.layers:
            kind = next(k for k, t in _LAYER_KINDS.items() if isinstance(layer, t))
            entry = {"kind": kind}
            entry.update(vars(layer))
            entries.append(entry)
        return json.dumps({"input_shape": list(self.input_shape), "layers": entries},
                          indent=2)

    @classmethod
    def from_json(cls, doc) -> "NetworkSpec":
        if isinstance(doc, (str, bytes)):
            doc = json.loads(doc)
        layers = []
        for entry in doc["layers"]:
            entry = dict(entry)  # callers may reuse the parsed document
            kind = entry.pop("kind")
            if kind not in _LAYER_KINDS:
                raise ConfigError(f"unknown layer kind {kind!r}")
            layers.append(_LAYER_KINDS[kind](**entry))
        return cls(input_shape=tuple(doc["input_shape"]), layers=tuple(layers))


def mlp_victim_spec(input_shape=(1, 28, 28), hidden: int = 256,
                    num_classes: int = 10) -> NetworkSpec:
    """Self-contained dense victim: flatten -> dense -> relu -> dense -> softmax."""
    n_in = int(np.prod(input_shape))
    return NetworkSpec(
        input_shape=tuple(input_shape),
        layers=(Flatten(), Dense(n_in, hidden), Relu(), Dense(hidden, num_classes),
                Softmax()),
    )


def lenet_spec() -> NetworkSpec:
    """LeNet-5-style convolutional victim for 28x28 grayscale inputs.

    conv1 pads by 2 so the classic 400-unit flattened feature size holds.
    Inference-only in this engine; weights come from the bridge exporter.
    """
    return NetworkSpec(
        input_shape=(1, 28, 28),
        layers=(
            Conv2d(1, 6, 5, stride=1, padding=2), Relu(), MaxPool(2, 2),
            Conv2d(6, 16, 5), Relu(), MaxPool(2, 2),
            Flatten(),
            Dense(400, 120), Relu(),
            Dense(120, 84), Relu(),
            Dense(84, 10), Softmax(),
        ),
    )


def init_weights(spec: NetworkSpec, rng_seed=0, dtype=np.float64) -> dict[str, np.ndarray]:
    """Glorot-normal initialization for every parametric layer; biases zero."""
    rng = np.random.default_rng(rng_seed)
    weights: dict[str, np.ndarray] = {}
    for name, shape in spec.param_shapes().items():
        if name.endswith(".bias"):
            weights[name] = np.zeros(shape, dtype=dtype)
        elif len(shape) == 2:
            fan_in, fan_out = shape
            std = math.sqrt(2.0 / (fan_in + fan_out))
            weights[name] = rng.normal(0.0, std, shape).astype(dtype)
        else:
            out_ch, in_ch, k, _ = shape
            fan_in = in_ch * k * k
            fan_out = out_ch * k * k
            std = math.sqrt(2.0 / (fan_in + fan_out))
            weights[name] = rng.normal(0.0, std, shape).astype(dtype)
    return weights


def check_weights(spec: NetworkSpec, weights: dict[str, np.ndarray]) -> None:
    expected = spec.param_shapes()
    missing = sorted(set(expected) - set(weights))
    extra = sorted(set(weights) - set(expected))
    if missing or extra:
        raise ConfigError(f"weights do not match spec: missing {missing}, extra {extra}")
    for name, shape in expected.items():
        if tuple(weights[name].shape) != shape:
            raise ConfigError(f"tensor {name} has shape {tuple(weights[name].shape)}, "
                              f"spec requires {shape}")


def softmax(z: np.ndarray) -> np.ndarray:
    """Numerically stabilized softmax over the last axis."""
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int,
            padding: int) -> np.ndarray:
    if padding:
        x = np.pad(x, ((0, 0), (padding, padding), (padding, padding)))
    k = w.shape[-1]
    windows = sliding_window_view(x, (k, k), axis=(1, 2))[:, ::stride, ::stride]
    # windows: (C_in, H_out, W_out, k, k); w: (C_out, C_in, k, k)
    out = np.einsum("cijuv,ocuv->oij", windows, w)
    return out + b[:, None, None]


def _maxpool(x: np.ndarray, kernel: int, stride: int) -> np.ndarray:
    windows = sliding_window_view(x, (kernel, kernel), axis=(1, 2))[:, ::stride, ::stride]
    return windows.max(axis=(3, 4))


def forward_one(spec: NetworkSpec, weights: dict[str, np.ndarray],
                x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Run a single sample through the stack; returns (logits, probs)."""
    act = np.asarray(x)
    logits = None
    for idx, layer in enumerate(spec.layers):
        if isinstance(layer, Dense):
            act = act @ weights[f"layer{idx}.weight"] + weights[f"layer{idx}.bias"]
        elif isinstance(layer, Conv2d):
            act = _conv2d(act, weights[f"layer{idx}.weight"],
                          weights[f"layer{idx}.bias"], layer.stride, layer.padding)
        elif isinstance(layer, MaxPool):
            act = _maxpool(act, layer.kernel, layer.stride)
        elif isinstance(layer, Relu):
            act = np.maximum(act, 0)
        elif isinstance(layer, Flatten):
            act = act.reshape(-1)
        elif isinstance(layer, Softmax):
            logits = act
            act = softmax(act)
    if logits is None:
        raise ConfigError("network has no softmax layer")
    return logits, act


def forward_builtin(spec: NetworkSpec, weights: dict[str, np.ndarray],
                    batch) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate a batch of images; returns stacked (logits, probs).

    Samples are processed independently, so results do not depend on the
    batch composition.
    """
    check_weights(spec, weights)
    spec.output_shapes()
    logits, probs = [], []
    for x in batch:
        if tuple(np.shape(x)) != tuple(spec.input_shape):
            raise ValueError(f"input shape {np.shape(x)} does not match "
                             f"spec input {spec.input_shape}")
        lg, pb = forward_one(spec, weights, x)
        logits.append(lg)
        probs.append(pb)
    return np.stack(logits), np.stack(probs)
