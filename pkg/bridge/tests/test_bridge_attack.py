"""End-to-end: spoofkit's greedy attack fooling the served LeNet over the wire."""

import sys

import numpy as np
import spoofkit as sk

import spoofbridge as sb


def test_spoof_over_stdio_bridge_fools_lenet(trained):
    _, _, checkpoint, _ = trained
    oracle = sk.RemoteOracle.spawn(
        [sys.executable, "-m", "spoofbridge.cli", "serve",
         "--model", "lenet", "--checkpoint", str(checkpoint), "--stdio"],
        batch_capacity=32,
    )
    try:
        assert oracle.num_classes == 10
        assert oracle.input_shape == (1, 28, 28)
        results = sk.spoof_batch(oracle, [
            sk.AttackConfig(target_class=c, budget=4000, seed=0,
                            early_stop_confidence=0.95)
            for c in range(10)
        ])
    finally:
        oracle.close()
    confidences = [r.final_confidence for r in results]
    assert all(r.queries_used <= 4000 for r in results)
    median = float(np.median(confidences))
    assert median >= 0.95, f"median confidence {median:.4f}"
    for r in results:
        trajectory = [conf for _, conf in r.trajectory]
        assert trajectory == sorted(trajectory)


def test_remote_oracle_counts_wire_queries(trained):
    model, _, _, _ = trained
    handler = sb.TorchHandler(model, sb.get_entry("lenet"), "lenet")
    with sk.WireServer(handler) as server:
        host, port = server.address
        oracle = sk.RemoteOracle.connect_tcp(host, port)
        result = sk.spoof_attack(
            oracle, sk.AttackConfig(target_class=3, budget=50, seed=1)
        )
        count = oracle.query_count
        oracle.close()
    assert result.queries_used == 50
    assert result.baseline_queries == 1
    assert count == 51
