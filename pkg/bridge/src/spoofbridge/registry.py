"""Model registry: what each served classifier expects and how to build it.

LeNet loads from a local checkpoint. The ImageNet entries pull torchvision's
pretrained checkpoints (downloaded or from a local weights directory) and
normalize the raw [0, 1] wire tensors server-side, keeping the client
genuinely black-box.
"""

import os
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import torch
from torch import nn

from .errors import ConfigError
from .lenet import load_checkpoint

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)
_IMAGENET_PREPROCESSING = (
    f"normalize(mean={list(IMAGENET_MEAN)}, std={list(IMAGENET_STD)}) on [0,1] RGB"
)


class Normalized(nn.Module):
    """Channel-wise (x - mean) / std in front of a pretrained backbone."""

    def __init__(self, backbone: nn.Module, mean, std):
        super().__init__()
        self.backbone = backbone
        self.register_buffer("mean", torch.tensor(mean).view(1, -1, 1, 1))
        self.register_buffer("std", torch.tensor(std).view(1, -1, 1, 1))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.backbone((x - self.mean) / self.std)


@dataclass(frozen=True)
class ModelEntry:
    num_classes: int
    input_shape: Tuple[int, int, int]
    preprocessing: str
    needs_checkpoint: bool
    build: Callable[[Optional[str], Optional[str]], nn.Module]


def _build_lenet(checkpoint: Optional[str], weights_dir: Optional[str]) -> nn.Module:
    if checkpoint is None:
        raise ConfigError("model 'lenet' needs --checkpoint (train one with train-lenet)")
    return load_checkpoint(checkpoint)


def _build_torchvision(name: str, weights_enum: str):
    def build(checkpoint: Optional[str], weights_dir: Optional[str]) -> nn.Module:
        import torchvision.models as models

        if weights_dir:
            os.environ["TORCH_HOME"] = str(weights_dir)
        weights = getattr(models, weights_enum).DEFAULT
        backbone = getattr(models, name)(weights=weights)
        backbone.eval()
        return Normalized(backbone, IMAGENET_MEAN, IMAGENET_STD)

    return build


REGISTRY = {
    "lenet": ModelEntry(10, (1, 28, 28), "identity on [0,1] grayscale", True, _build_lenet),
    "alexnet": ModelEntry(1000, (3, 224, 224), _IMAGENET_PREPROCESSING, False,
                          _build_torchvision("alexnet", "AlexNet_Weights")),
    "resnet50": ModelEntry(1000, (3, 224, 224), _IMAGENET_PREPROCESSING, False,
                           _build_torchvision("resnet50", "ResNet50_Weights")),
    "vit_b16": ModelEntry(1000, (3, 224, 224), _IMAGENET_PREPROCESSING, False,
                          _build_torchvision("vit_b_16", "ViT_B_16_Weights")),
}


def get_entry(model_id: str) -> ModelEntry:
    if model_id not in REGISTRY:
        raise ConfigError(f"unknown model {model_id!r}; known: {sorted(REGISTRY)}")
    return REGISTRY[model_id]
