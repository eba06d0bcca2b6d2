from pathlib import Path

import pytest
import spoofkit as sk

import spoofbridge as sb

DATA_DIR = Path(__file__).resolve().parents[2] / "data" / "mnist"


@pytest.fixture(scope="session")
def mnist():
    return sk.load_mnist_dir(DATA_DIR)


@pytest.fixture(scope="session")
def trained(mnist, tmp_path_factory):
    """LeNet trained once per session, with its checkpoint and SPWT export."""
    train, test = mnist
    model = sb.LeNet()
    report = sb.train_lenet(
        model, train.images, train.labels, test.images, test.labels,
        sb.LeNetTrainConfig(epochs=4, seed=0),
    )
    root = tmp_path_factory.mktemp("lenet")
    checkpoint = root / "lenet.pt"
    spwt = root / "lenet.spwt"
    sb.save_checkpoint(model, checkpoint)
    sb.export_lenet_weights(model, spwt)
    return model, report, checkpoint, spwt
