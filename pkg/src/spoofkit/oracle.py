"""Query-counted classifier interface over builtin, callable, and remote backends."""

from __future__ import annotations

import threading
from typing import Callable, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ProtocolError
from .network import NetworkSpec, check_weights, forward_builtin
from .wire import WireClient

Batch = Union[np.ndarray, Sequence[np.ndarray]]


class Oracle:
    """Base class: shape validation, capacity chunking, and query accounting.

    Subclasses implement _predict_batch on a (B, C, H, W) float array and
    return a (B, num_classes) array of probabilities.
    """

    def __init__(self, num_classes: int, input_shape: Tuple[int, int, int], batch_capacity: int):
        if batch_capacity < 1:
            raise ValueError(f"batch_capacity must be >= 1, got {batch_capacity}")
        self.num_classes = int(num_classes)
        self.input_shape = tuple(int(d) for d in input_shape)
        self.batch_capacity = int(batch_capacity)
        self._query_count = 0
        self._count_lock = threading.Lock()

    @property
    def query_count(self) -> int:
        """Total images evaluated so far, across all predict calls."""
        with self._count_lock:
            return self._query_count

    def _coerce(self, batch: Batch) -> np.ndarray:
        arr = np.stack([np.asarray(img) for img in batch]) if isinstance(batch, (list, tuple)) else np.asarray(batch)
        if arr.ndim != 4:
            raise ValueError(f"batch must be 4-d (B,C,H,W), got shape {arr.shape}")
        if arr.shape[1:] != self.input_shape:
            raise ValueError(f"images have shape {arr.shape[1:]}, oracle expects {self.input_shape}")
        if arr.shape[0] == 0:
            raise ValueError("batch must be non-empty")
        return arr

    def predict(self, batch: Batch) -> np.ndarray:
        arr = self._coerce(batch)
        rows = []
        for start in range(0, arr.shape[0], self.batch_capacity):
            chunk = arr[start : start + self.batch_capacity]
            probs = np.asarray(self._predict_batch(chunk))
            if probs.shape != (chunk.shape[0], self.num_classes):
                raise ProtocolError(
                    f"backend returned shape {probs.shape}, expected {(chunk.shape[0], self.num_classes)}"
                )
            with self._count_lock:
                self._query_count += chunk.shape[0]
            rows.append(probs)
        return np.concatenate(rows, axis=0)

    def predict_one(self, image: np.ndarray) -> np.ndarray:
        return self.predict(np.asarray(image)[None])[0]

    def _predict_batch(self, batch: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class BuiltinOracle(Oracle):
    """Self-contained victim: a NetworkSpec plus weights run on the local engine."""

    def __init__(self, spec: NetworkSpec, weights: Mapping[str, np.ndarray], batch_capacity: int = 1024):
        check_weights(spec, weights)
        super().__init__(spec.num_classes, spec.input_shape, batch_capacity)
        self.spec = spec
        self.weights = dict(weights)

    def _predict_batch(self, batch: np.ndarray) -> np.ndarray:
        _, probs = forward_builtin(self.spec, self.weights, batch)
        return probs


class FunctionOracle(Oracle):
    """Wraps any batch → probs callable; handy for toy victims in tests."""

    def __init__(
        self,
        fn: Callable[[np.ndarray], np.ndarray],
        num_classes: int,
        input_shape: Tuple[int, int, int],
        batch_capacity: int = 1024,
    ):
        super().__init__(num_classes, input_shape, batch_capacity)
        self._fn = fn

    def _predict_batch(self, batch: np.ndarray) -> np.ndarray:
        return self._fn(batch)


class RemoteOracle(Oracle):
    """Backend speaking the wire protocol through a WireClient."""

    def __init__(self, client: WireClient, batch_capacity: int = 32):
        info = client.info if client.info is not None else client.hello()
        super().__init__(info.num_classes, info.input_shape, batch_capacity)
        self.client = client
        self.server_extra = dict(info.extra)

    def _predict_batch(self, batch: np.ndarray) -> np.ndarray:
        probs = self.client.predict(batch)
        if np.any(probs < 0) or np.any(np.abs(probs.sum(axis=1) - 1.0) > 1e-5):
            raise ProtocolError("server returned rows that are not probability vectors")
        return probs

    def close(self) -> None:
        self.client.close()

    @classmethod
    def connect_tcp(cls, host: str, port: int, timeout: Optional[float] = None, batch_capacity: int = 32) -> "RemoteOracle":
        return cls(WireClient.connect_tcp(host, port, timeout=timeout), batch_capacity=batch_capacity)

    @classmethod
    def spawn(cls, args: Sequence[str], batch_capacity: int = 32) -> "RemoteOracle":
        return cls(WireClient.spawn(args), batch_capacity=batch_capacity)
