"""Wire-protocol handler and server wiring for torch-backed classifiers.

Speaks spoofkit's NDJSON protocol verbatim via its server helpers, so any
spoofkit RemoteOracle can attack a served model. Only softmax probabilities
ever cross the wire; gradients and logits stay on the server.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
import torch
from spoofkit import WireServer, serve_stdio

from .errors import ConfigError
from .registry import ModelEntry, get_entry


@dataclass
class BridgeConfig:
    model_id: str
    checkpoint: Optional[str] = None
    weights_dir: Optional[str] = None
    host: str = "127.0.0.1"
    port: int = 0
    stdio: bool = False
    batch_cap: int = 256

    def __post_init__(self):
        get_entry(self.model_id)
        if self.batch_cap < 1:
            raise ConfigError(f"batch_cap must be >= 1, got {self.batch_cap}")
        if self.stdio and self.port:
            raise ConfigError("pick either stdio or a TCP port, not both")


class TorchHandler:
    """Adapts an eval-mode torch module to the wire server's handler hooks."""

    def __init__(self, model: torch.nn.Module, entry: ModelEntry, model_id: str,
                 batch_cap: int = 256):
        self.model = model.eval()
        self.num_classes = entry.num_classes
        self.input_shape = entry.input_shape
        self.batch_cap = int(batch_cap)
        self._model_id = model_id
        self._preprocessing = entry.preprocessing

    def hello_extra(self) -> dict:
        return {"model": self._model_id, "preprocessing": self._preprocessing}

    def predict(self, batch: np.ndarray) -> np.ndarray:
        if batch.shape[0] > self.batch_cap:
            raise ValueError(f"batch of {batch.shape[0]} exceeds cap {self.batch_cap}")
        with torch.no_grad():
            tensor = torch.from_numpy(np.ascontiguousarray(batch)).float()
            probs = torch.softmax(self.model(tensor), dim=1)
        return probs.double().numpy()


def build_handler(cfg: BridgeConfig) -> TorchHandler:
    entry = get_entry(cfg.model_id)
    if entry.needs_checkpoint and cfg.checkpoint is None:
        raise ConfigError(f"model {cfg.model_id!r} needs --checkpoint")
    model = entry.build(cfg.checkpoint, cfg.weights_dir)
    return TorchHandler(model, entry, cfg.model_id, cfg.batch_cap)


def serve(cfg: BridgeConfig) -> None:
    """Run until EOF (stdio) or interrupt (TCP). Blocks the calling thread."""
    handler = build_handler(cfg)
    if cfg.stdio:
        serve_stdio(handler)
        return
    server = WireServer(handler, host=cfg.host, port=cfg.port).start()
    host, port = server.address
    print(f"listening on {host}:{port}", flush=True)
    try:
        server._accept_thread.join()
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
