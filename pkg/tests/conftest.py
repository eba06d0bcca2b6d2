import pytest

import spoofkit as sk
from helpers import DATA_DIR


@pytest.fixture(scope="session")
def mnist():
    return sk.load_mnist_dir(DATA_DIR)


@pytest.fixture(scope="session")
def victim(mnist):
    """The MLP victim used across the suite: spec, float64 weights, test accuracy."""
    train, test = mnist
    spec = sk.mlp_victim_spec()
    cfg = sk.TrainConfig(learning_rate=0.5, epochs=10, batch_size=64, seed=0)
    outcome = sk.train_dense(spec, train, test, cfg)
    accuracy = sk.evaluate_accuracy(spec, outcome.weights, test.images, test.labels)
    return spec, outcome.weights, accuracy


@pytest.fixture()
def victim_oracle(victim):
    spec, weights, _ = victim
    return sk.BuiltinOracle(spec, weights)
