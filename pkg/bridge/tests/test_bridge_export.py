"""SPWT export: layout fidelity and cross-engine agreement with the builtin engine."""

import numpy as np
import pytest
import spoofkit as sk
import torch

import spoofbridge as sb


def test_exported_tensors_match_builtin_layout(trained):
    _, _, _, spwt = trained
    loaded = sk.load_weights(spwt)
    spec = sk.lenet_spec()
    sk.check_weights(spec, loaded)
    assert sorted(loaded) == [
        "layer0.bias", "layer0.weight",
        "layer11.bias", "layer11.weight",
        "layer3.bias", "layer3.weight",
        "layer7.bias", "layer7.weight",
        "layer9.bias", "layer9.weight",
    ]
    assert loaded["layer0.weight"].shape == (6, 1, 5, 5)
    assert loaded["layer7.weight"].shape == (400, 120)
    assert loaded["layer11.weight"].shape == (84, 10)


def test_cross_engine_agreement_on_heldout_images(trained, mnist):
    model, _, _, spwt = trained
    _, test = mnist
    probe = test.images[:1000]
    with torch.no_grad():
        torch_probs = torch.softmax(
            model(torch.from_numpy(probe).float()), dim=1
        ).double().numpy()
    _, builtin_probs = sk.forward_builtin(sk.lenet_spec(), sk.load_weights(spwt), probe)
    agreement = float((torch_probs.argmax(1) == builtin_probs.argmax(1)).mean())
    deviation = float(np.abs(torch_probs - builtin_probs).max())
    assert agreement >= 0.995, f"top-1 agreement {agreement:.4f}"
    assert deviation <= 1e-3, f"max probability deviation {deviation:.2e}"


def test_checkpoint_round_trip(trained, tmp_path):
    model, _, checkpoint, _ = trained
    reloaded = sb.load_checkpoint(checkpoint)
    for name, tensor in model.state_dict().items():
        assert torch.equal(reloaded.state_dict()[name], tensor), name


def test_missing_tensor_is_an_export_error(trained):
    state = {k: v for k, v in trained[0].state_dict().items() if k != "classifier.5.bias"}
    with pytest.raises(sb.ExportError, match="classifier.5.bias"):
        sb.state_dict_to_builtin(state)


def test_wrong_shape_is_an_export_error(trained):
    state = dict(trained[0].state_dict())
    state["classifier.1.weight"] = torch.zeros(120, 399)
    with pytest.raises(sb.ExportError, match="builtin layout"):
        sb.state_dict_to_builtin(state)


def test_truncated_file_fails_primary_validation(trained, tmp_path):
    _, _, _, spwt = trained
    blob = spwt.read_bytes()
    clipped = tmp_path / "clipped.spwt"
    clipped.write_bytes(blob[: len(blob) - 64])
    with pytest.raises(sk.FormatError):
        sk.load_weights(clipped)
