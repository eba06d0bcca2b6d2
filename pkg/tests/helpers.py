"""Shared toy oracles and paths importable from any test module."""

from pathlib import Path

import numpy as np

import spoofkit as sk

DATA_DIR = Path(__file__).resolve().parent.parent / "data" / "mnist"


def mean_channel0_oracle(channels: int = 3, side: int = 8) -> sk.FunctionOracle:
    """Two-class toy: class-0 confidence is the mean of channel 0."""

    def fn(batch):
        m = batch[:, 0].mean(axis=(1, 2))
        return np.stack([m, 1.0 - m], axis=1)

    return sk.FunctionOracle(fn, num_classes=2, input_shape=(channels, side, side))


def constant_oracle(probs, input_shape=(1, 4, 4)) -> sk.FunctionOracle:
    probs = np.asarray(probs, dtype=np.float64)

    def fn(batch):
        return np.tile(probs, (batch.shape[0], 1))

    return sk.FunctionOracle(fn, num_classes=len(probs), input_shape=input_shape)
