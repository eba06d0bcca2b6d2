"""Trainable LeNet-5 variant mirroring spoofkit's builtin convolutional victim.

Layer sizes and the padding on conv1 match spoofkit.lenet_spec() exactly, so
an exported checkpoint runs unchanged on the builtin engine.
"""

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn


class LeNet(nn.Module):
    def __init__(self):
        super().__init__()
        # conv1 pads by 2: 28x28 stays 28x28, giving the classic 400 features
        self.features = nn.Sequential(
            nn.Conv2d(1, 6, 5, padding=2), nn.ReLU(), nn.MaxPool2d(2, 2),
            nn.Conv2d(6, 16, 5), nn.ReLU(), nn.MaxPool2d(2, 2),
        )
        self.classifier = nn.Sequential(
            nn.Flatten(),
            nn.Linear(400, 120), nn.ReLU(),
            nn.Linear(120, 84), nn.ReLU(),
            nn.Linear(84, 10),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.classifier(self.features(x))


@dataclass
class LeNetTrainConfig:
    epochs: int = 4
    learning_rate: float = 1e-3
    batch_size: int = 64
    seed: int = 0


@dataclass
class LeNetTrainReport:
    epochs: int
    train_loss: float
    test_accuracy: float


def train_lenet(model: LeNet, train_images: np.ndarray, train_labels: np.ndarray,
                test_images: np.ndarray, test_labels: np.ndarray,
                cfg: LeNetTrainConfig) -> LeNetTrainReport:
    """Adam cross-entropy training on (N, 1, 28, 28) arrays in [0, 1]."""
    torch.manual_seed(cfg.seed)
    images = torch.from_numpy(np.ascontiguousarray(train_images)).float()
    labels = torch.from_numpy(np.ascontiguousarray(train_labels)).long()
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)
    loss_fn = nn.CrossEntropyLoss()
    shuffle_gen = torch.Generator().manual_seed(cfg.seed)

    model.train()
    last_loss = float("nan")
    for _ in range(cfg.epochs):
        order = torch.randperm(images.shape[0], generator=shuffle_gen)
        total, seen = 0.0, 0
        for start in range(0, images.shape[0], cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            optimizer.zero_grad()
            loss = loss_fn(model(images[idx]), labels[idx])
            loss.backward()
            optimizer.step()
            total += float(loss.detach()) * idx.shape[0]
            seen += idx.shape[0]
        last_loss = total / seen
    accuracy = evaluate_lenet(model, test_images, test_labels)
    return LeNetTrainReport(cfg.epochs, last_loss, accuracy)


def evaluate_lenet(model: LeNet, images: np.ndarray, labels: np.ndarray,
                   batch_size: int = 512) -> float:
    model.eval()
    hits = 0
    with torch.no_grad():
        for start in range(0, images.shape[0], batch_size):
            chunk = torch.from_numpy(np.ascontiguousarray(images[start : start + batch_size])).float()
            pred = model(chunk).argmax(dim=1).numpy()
            hits += int((pred == labels[start : start + batch_size]).sum())
    return hits / images.shape[0]


def save_checkpoint(model: LeNet, path) -> None:
    torch.save(model.state_dict(), path)


def load_checkpoint(path) -> LeNet:
    model = LeNet()
    model.load_state_dict(torch.load(path, map_location="cpu", weights_only=True))
    model.eval()
    return model
