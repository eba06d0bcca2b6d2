"""Torch-backed oracle bridge for spoofkit: serve real classifiers over the
wire protocol and export the LeNet victim to the builtin engine's format."""

from .errors import BridgeError, ConfigError, ExportError
from .export import export_lenet_weights, state_dict_to_builtin
from .lenet import (
    LeNet,
    LeNetTrainConfig,
    LeNetTrainReport,
    evaluate_lenet,
    load_checkpoint,
    save_checkpoint,
    train_lenet,
)
from .registry import REGISTRY, ModelEntry, get_entry
from .server import BridgeConfig, TorchHandler, build_handler, serve

__all__ = [
    "BridgeConfig",
    "BridgeError",
    "ConfigError",
    "ExportError",
    "LeNet",
    "LeNetTrainConfig",
    "LeNetTrainReport",
    "ModelEntry",
    "REGISTRY",
    "TorchHandler",
    "build_handler",
    "evaluate_lenet",
    "export_lenet_weights",
    "get_entry",
    "load_checkpoint",
    "save_checkpoint",
    "serve",
    "state_dict_to_builtin",
    "train_lenet",
]
