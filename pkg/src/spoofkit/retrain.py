"""SGD trainer for dense stacks plus the extra-class retraining defense."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .datasets import LabeledDataset
from .errors import CapacityError, ConfigError, TrainingScopeError
from .network import (
    Conv2d,
    Dense,
    Flatten,
    MaxPool,
    NetworkSpec,
    Relu,
    Softmax,
    _conv2d,
    _maxpool,
    check_weights,
    init_weights,
    softmax,
)

SCOPES = ("all-dense", "final-layer-only")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float
    epochs: int
    batch_size: int
    seed: int
    trainable_scope: str = "all-dense"

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.trainable_scope not in SCOPES:
            raise ConfigError(f"trainable_scope must be one of {SCOPES}")


@dataclass
class EpochStats:
    epoch: int
    loss: float
    train_accuracy: float
    val_accuracy: Optional[float]


@dataclass
class TrainOutcome:
    weights: Dict[str, np.ndarray]
    history: List[EpochStats]


def _suffix_start(spec: NetworkSpec) -> int:
    """Index of the trailing flatten/dense/relu/softmax stack that training
    backpropagates through. Dense layers are only trainable inside it."""
    start = len(spec.layers)
    for layer in reversed(spec.layers):
        if isinstance(layer, (Dense, Relu, Flatten, Softmax)):
            start -= 1
        else:
            break
    suffix = spec.layers[start:]
    if not suffix or not isinstance(suffix[-1], Softmax):
        raise TrainingScopeError("network must end with a softmax layer")
    if not any(isinstance(l, Dense) for l in suffix):
        raise TrainingScopeError("no dense layer available to train")
    for i, layer in enumerate(spec.layers[:start]):
        if isinstance(layer, Dense):
            raise TrainingScopeError(
                f"dense layer {i} sits behind a non-dense layer and cannot be trained"
            )
    return start


def _dense_names(spec: NetworkSpec, scope: str) -> List[str]:
    start = _suffix_start(spec)
    dense_idx = [i for i in range(start, len(spec.layers)) if isinstance(spec.layers[i], Dense)]
    if scope == "final-layer-only":
        dense_idx = dense_idx[-1:]
    names = []
    for i in dense_idx:
        names += [f"layer{i}.weight", f"layer{i}.bias"]
    return names


def _forward_prefix(spec: NetworkSpec, weights: Mapping[str, np.ndarray],
                    images: np.ndarray, start: int) -> np.ndarray:
    """Run the frozen feature extractor batched; conv/pool fall back to a
    per-sample loop (same kernels as the inference engine)."""
    acts = np.asarray(images, dtype=np.float64)
    for idx in range(start):
        layer = spec.layers[idx]
        if isinstance(layer, Conv2d):
            w = weights[f"layer{idx}.weight"]
            b = weights[f"layer{idx}.bias"]
            acts = np.stack([_conv2d(x, w, b, layer.stride, layer.padding) for x in acts])
        elif isinstance(layer, MaxPool):
            acts = np.stack([_maxpool(x, layer.kernel, layer.stride) for x in acts])
        elif isinstance(layer, Relu):
            acts = np.maximum(acts, 0)
        elif isinstance(layer, Flatten):
            acts = acts.reshape(acts.shape[0], -1)
        else:
            raise TrainingScopeError(f"unsupported prefix layer {layer!r}")
    return acts


def _forward_suffix(spec: NetworkSpec, weights: Mapping[str, np.ndarray],
                    feats: np.ndarray, start: int):
    """Batched forward through the trainable stack, caching each layer input."""
    cache = []
    acts = feats
    logits = None
    for idx in range(start, len(spec.layers)):
        layer = spec.layers[idx]
        cache.append((idx, layer, acts))
        if isinstance(layer, Dense):
            acts = acts @ weights[f"layer{idx}.weight"] + weights[f"layer{idx}.bias"]
        elif isinstance(layer, Relu):
            acts = np.maximum(acts, 0)
        elif isinstance(layer, Flatten):
            acts = acts.reshape(acts.shape[0], -1)
        else:  # Softmax
            logits = acts
            acts = softmax(acts)
    return cache, logits, acts


def loss_and_grads(
    spec: NetworkSpec,
    weights: Mapping[str, np.ndarray],
    images: np.ndarray,
    labels: np.ndarray,
) -> Tuple[float, Dict[str, np.ndarray]]:
    """Mean cross-entropy over the batch and its exact gradients for every
    dense tensor in the trainable stack."""
    start = _suffix_start(spec)
    feats = _forward_prefix(spec, weights, images, start)
    cache, _, probs = _forward_suffix(spec, weights, feats, start)
    n = probs.shape[0]
    labels = np.asarray(labels)
    loss = float(-np.log(probs[np.arange(n), labels]).mean())

    grad = probs.copy()
    grad[np.arange(n), labels] -= 1.0
    grad /= n
    grads: Dict[str, np.ndarray] = {}
    for idx, layer, layer_in in reversed(cache):
        if isinstance(layer, Softmax):
            continue  # folded into the cross-entropy delta above
        if isinstance(layer, Dense):
            grads[f"layer{idx}.weight"] = layer_in.T @ grad
            grads[f"layer{idx}.bias"] = grad.sum(axis=0)
            grad = grad @ weights[f"layer{idx}.weight"].T
        elif isinstance(layer, Relu):
            grad = grad * (layer_in > 0)
        elif isinstance(layer, Flatten):
            grad = grad.reshape(layer_in.shape)
    return loss, grads


def _accuracy_from_probs(probs: np.ndarray, labels: np.ndarray) -> float:
    return float((probs.argmax(axis=1) == labels).mean())


def evaluate_accuracy(
    spec: NetworkSpec,
    weights: Mapping[str, np.ndarray],
    images: np.ndarray,
    labels: np.ndarray,
    batch_size: int = 512,
) -> float:
    start = _suffix_start(spec)
    hits = 0
    labels = np.asarray(labels)
    for lo in range(0, len(images), batch_size):
        chunk = images[lo : lo + batch_size]
        feats = _forward_prefix(spec, weights, chunk, start)
        _, _, probs = _forward_suffix(spec, weights, feats, start)
        hits += int((probs.argmax(axis=1) == labels[lo : lo + batch_size]).sum())
    return hits / len(images)


def train_dense(
    spec: NetworkSpec,
    train: LabeledDataset,
    val: Optional[LabeledDataset],
    cfg: TrainConfig,
    initial_weights: Optional[Mapping[str, np.ndarray]] = None,
) -> TrainOutcome:
    """Minibatch SGD on cross-entropy over the dense stack. The frozen prefix
    is evaluated once per dataset and cached; only tensors inside the
    configured scope are updated, everything else is returned untouched."""
    trainable = _dense_names(spec, cfg.trainable_scope)
    start = _suffix_start(spec)
    if initial_weights is None:
        init_seq, shuffle_seq = np.random.SeedSequence([cfg.seed]).spawn(2)
        weights = init_weights(spec, rng_seed=init_seq)
    else:
        shuffle_seq = np.random.SeedSequence([cfg.seed]).spawn(2)[1]
        # frozen tensors keep their exact arrays; only trainable ones go float64
        weights = dict(initial_weights)
        for name in trainable:
            weights[name] = np.asarray(weights[name], dtype=np.float64)
    check_weights(spec, weights)
    if cfg.epochs == 0:
        return TrainOutcome(dict(weights), [])

    rng = np.random.default_rng(shuffle_seq)
    train_feats = _forward_prefix(spec, weights, train.images, start)
    train_labels = train.labels
    val_feats = None
    if val is not None:
        val_feats = _forward_prefix(spec, weights, val.images, start)

    history: List[EpochStats] = []
    n = len(train_feats)
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        losses = []
        for lo in range(0, n, cfg.batch_size):
            batch = order[lo : lo + cfg.batch_size]
            feats, labels = train_feats[batch], train_labels[batch]
            cache, _, probs = _forward_suffix(spec, weights, feats, start)
            b = len(batch)
            losses.append(float(-np.log(probs[np.arange(b), labels]).mean()))
            grad = probs.copy()
            grad[np.arange(b), labels] -= 1.0
            grad /= b
            for idx, layer, layer_in in reversed(cache):
                if isinstance(layer, Softmax):
                    continue
                if isinstance(layer, Dense):
                    wname, bname = f"layer{idx}.weight", f"layer{idx}.bias"
                    w_before = weights[wname]
                    if wname in trainable:
                        weights[wname] = w_before - cfg.learning_rate * (layer_in.T @ grad)
                        weights[bname] = weights[bname] - cfg.learning_rate * grad.sum(axis=0)
                    grad = grad @ w_before.T  # dx w.r.t. the pre-update weight
                elif isinstance(layer, Relu):
                    grad = grad * (layer_in > 0)
                elif isinstance(layer, Flatten):
                    grad = grad.reshape(layer_in.shape)
        _, _, train_probs = _forward_suffix(spec, weights, train_feats, start)
        train_acc = _accuracy_from_probs(train_probs, train_labels)
        val_acc = None
        if val_feats is not None:
            _, _, val_probs = _forward_suffix(spec, weights, val_feats, start)
            val_acc = _accuracy_from_probs(val_probs, val.labels)
        history.append(EpochStats(epoch, float(np.mean(losses)), train_acc, val_acc))
    return TrainOutcome(weights, history)


def extend_final_layer(
    spec: NetworkSpec, weights: Mapping[str, np.ndarray]
) -> Tuple[NetworkSpec, Dict[str, np.ndarray]]:
    """Widen the final dense layer by one output class.

    The new column and bias entry start at zero; every other tensor is passed
    through unchanged so frozen-scope checks can compare bytes.
    """
    dense_idx = [i for i, l in enumerate(spec.layers) if isinstance(l, Dense)]
    if not dense_idx or not isinstance(spec.layers[-1], Softmax):
        raise TrainingScopeError("network must end with dense + softmax to gain a class")
    last = dense_idx[-1]
    old: Dense = spec.layers[last]
    layers = list(spec.layers)
    layers[last] = Dense(old.in_features, old.out_features + 1)
    new_spec = NetworkSpec(spec.input_shape, tuple(layers))

    new_weights = dict(weights)
    w = np.asarray(weights[f"layer{last}.weight"])
    b = np.asarray(weights[f"layer{last}.bias"])
    new_weights[f"layer{last}.weight"] = np.concatenate(
        [w, np.zeros((w.shape[0], 1), dtype=w.dtype)], axis=1
    )
    new_weights[f"layer{last}.bias"] = np.concatenate([b, np.zeros(1, dtype=b.dtype)])
    return new_spec, new_weights


def build_fooling_class_dataset(
    fooling_images: Sequence,
    per_class_count: int,
    split_ratio: float,
    base_train: LabeledDataset,
    base_val: LabeledDataset,
    num_classes: int,
) -> Tuple[LabeledDataset, LabeledDataset]:
    """Label fooling images as the new class `num_classes` and merge them with
    the original train/val splits.

    `fooling_images` holds attack results (anything with target_class and
    final_image) or plain (class, image) pairs; the first per_class_count
    images of every class are used, split_ratio of them into train.
    """
    if not (0.0 <= split_ratio <= 1.0):
        raise ConfigError(f"split_ratio must be in [0, 1], got {split_ratio}")
    by_class: Dict[int, List[np.ndarray]] = {c: [] for c in range(num_classes)}
    for item in fooling_images:
        if isinstance(item, tuple):
            target, image = item
        else:
            target, image = item.target_class, item.final_image
        if target in by_class:
            by_class[target].append(np.asarray(image, dtype=np.float32))
    shortfalls = [
        f"class {c}: need {per_class_count}, have {len(imgs)}"
        for c, imgs in by_class.items()
        if len(imgs) < per_class_count
    ]
    if shortfalls:
        raise CapacityError("not enough fooling images: " + "; ".join(shortfalls))

    n_train = int(math.floor(per_class_count * split_ratio + 1e-9))
    train_imgs, val_imgs = [], []
    for c in range(num_classes):
        taken = by_class[c][:per_class_count]
        train_imgs += taken[:n_train]
        val_imgs += taken[n_train:]
    new_label = num_classes

    def merged(base: LabeledDataset, extra: List[np.ndarray], split: str) -> LabeledDataset:
        if not extra:
            return LabeledDataset(base.images, base.labels, split)
        images = np.concatenate([base.images, np.stack(extra)])
        labels = np.concatenate([base.labels, np.full(len(extra), new_label, dtype=np.int64)])
        return LabeledDataset(images, labels, split)

    return merged(base_train, train_imgs, "train"), merged(base_val, val_imgs, "val")


def fine_tune_final_layer(
    spec: NetworkSpec,
    weights: Mapping[str, np.ndarray],
    train: LabeledDataset,
    val: Optional[LabeledDataset],
    cfg: TrainConfig,
) -> TrainOutcome:
    """Train only the final dense layer, keeping every other tensor frozen."""
    scoped = replace(cfg, trainable_scope="final-layer-only")
    return train_dense(spec, train, val, scoped, initial_weights=weights)
