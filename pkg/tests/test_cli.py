"""End-to-end command-line flows and exit codes."""

import json
import subprocess
import sys
from pathlib import Path
from types import SimpleNamespace

import numpy as np
import pytest

import spoofkit as sk
from helpers import DATA_DIR
from spoofkit.cli import main
from spoofkit.network import Dense, Flatten, NetworkSpec, Softmax


@pytest.fixture(scope="module")
def cli_env(tmp_path_factory):
    """One trained victim and one attack run, shared by the read-only tests."""
    root = tmp_path_factory.mktemp("cli")
    weights = root / "mlp.spwt"
    code = main([
        "train", "--data", str(DATA_DIR), "--out", str(weights),
        "--epochs", "1", "--lr", "0.5", "--batch-size", "128",
    ])
    assert code == 0 and weights.exists()

    run_dir = root / "spoof_run"
    code = main([
        "attack", "--network", "mlp", "--weights", str(weights),
        "--budget", "10", "--seeds", "0,1", "--stride", "5",
        "--classifier-id", "mlp", "--out", str(run_dir),
    ])
    assert code == 0
    return SimpleNamespace(root=root, weights=weights, run_dir=run_dir)


def test_attack_run_artifacts(cli_env):
    for seed in (0, 1):
        seed_dir = cli_env.run_dir / f"seed_{seed}"
        assert (seed_dir / "records.json").exists()
        assert len(list(seed_dir.glob("class_*.png"))) == 10
    assert (cli_env.run_dir / "aggregate.csv").exists()
    record = sk.RunRecord.load(cli_env.run_dir / "seed_0" / "records.json")
    assert set(record.classes) == set(range(10))
    assert all(o.queries == 10 for o in record.classes.values())


def test_attack_prints_summary(cli_env, capsys, tmp_path):
    code = main([
        "attack", "--network", "mlp", "--weights", str(cli_env.weights),
        "--budget", "5", "--seeds", "0", "--targets", "3",
        "--out", str(tmp_path / "run"),
    ])
    captured = capsys.readouterr()
    assert code == 0
    assert "run directory:" in captured.out
    assert "median confidence" in captured.out


def test_evolve_cli(cli_env, tmp_path):
    run_dir = tmp_path / "evolve_run"
    code = main([
        "evolve", "--network", "mlp", "--weights", str(cli_env.weights),
        "--encoding", "direct", "--population", "4", "--generations", "5",
        "--seeds", "0", "--classifier-id", "mlp", "--out", str(run_dir),
    ])
    assert code == 0
    assert (run_dir / "seed_0" / "archive.json").exists()
    record = sk.RunRecord.load(run_dir / "seed_0" / "records.json")
    assert all(o.queries == 2.0 for o in record.classes.values())  # 20 evals / 10 bins


def test_metrics_cli(cli_env, tmp_path, capsys):
    out = tmp_path / "summary.csv"
    code = main(["metrics", "--runs", str(cli_env.run_dir), "--out", str(out)])
    assert code == 0
    rows = sk.read_aggregate_csv(out)
    assert len(rows) == 1
    assert rows[0]["attack"] == "spoof"
    assert rows[0]["classifier"] == "mlp"
    assert float(rows[0]["queries_per_target"]) == 10.0
    assert float(rows[0]["runtime_hours"]) > 0.0  # wall clock restored from timing.json
    assert "wrote" in capsys.readouterr().out


def test_metrics_cli_multiple_runs(cli_env, tmp_path):
    evolve_dir = tmp_path / "evolve_run"
    assert main([
        "evolve", "--network", "mlp", "--weights", str(cli_env.weights),
        "--encoding", "direct", "--population", "4", "--generations", "5",
        "--seeds", "0", "--classifier-id", "mlp", "--out", str(evolve_dir),
    ]) == 0
    out = tmp_path / "summary.csv"
    code = main(["metrics", "--runs", str(cli_env.run_dir), str(evolve_dir),
                 "--out", str(out)])
    assert code == 0
    assert [r["attack"] for r in sk.read_aggregate_csv(out)] == ["spoof", "direct"]


def test_export_cli(cli_env, tmp_path):
    out = tmp_path / "heat.csv"
    code = main(["export", "--run", str(cli_env.run_dir), "--seed", "1",
                 "--out", str(out)])
    assert code == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "class,checkpoint_query,confidence"
    # 10 classes x checkpoints 0,5,10
    assert len(lines) == 1 + 30


def test_attack_from_config_file(cli_env, tmp_path):
    cfg = sk.ExperimentConfig(
        attack="spoof",
        oracle={"backend": "builtin", "network": "mlp", "weights": str(cli_env.weights)},
        seeds=(0,),
        budget=5,
        targets=(2,),
        classifier_id="mlp",
        output_dir=str(tmp_path / "from_config"),
    )
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg.to_json()))
    assert main(["attack", "--config", str(path)]) == 0
    assert (tmp_path / "from_config" / "seed_0" / "class_2.png").exists()


def test_attack_with_network_json_file(tmp_path):
    spec = NetworkSpec((1, 6, 6), (Flatten(), Dense(36, 3), Softmax()))
    spec_path = tmp_path / "tiny.json"
    spec_path.write_text(spec.to_json())
    weights_path = tmp_path / "tiny.spwt"
    sk.save_weights(sk.init_weights(spec, rng_seed=0), weights_path)
    code = main([
        "attack", "--network", str(spec_path), "--weights", str(weights_path),
        "--budget", "8", "--seeds", "0", "--targets", "0",
        "--out", str(tmp_path / "run"),
    ])
    assert code == 0
    assert (tmp_path / "run" / "seed_0" / "class_0.png").exists()


def test_retrain_cli(cli_env, tmp_path, capsys):
    out = tmp_path / "retrained.spwt"
    report = tmp_path / "report.json"
    code = main([
        "retrain", "--data", str(DATA_DIR), "--network", "mlp",
        "--weights", str(cli_env.weights), "--runs", str(cli_env.run_dir),
        "--per-class", "2", "--epochs", "1", "--lr", "0.1",
        "--out", str(out), "--report", str(report),
    ])
    assert code == 0
    assert "original-class val accuracy" in capsys.readouterr().out
    weights = sk.load_weights(out)
    assert weights["layer3.weight"].shape == (256, 11)
    doc = json.loads(report.read_text())
    assert doc["num_classes"] == 11
    assert doc["fooling_images"] == 20
    assert 0.0 <= doc["original_val_accuracy_after"] <= 1.0
    assert len(doc["epochs"]) == 1


def test_retrain_capacity_error(cli_env, tmp_path, capsys):
    code = main([
        "retrain", "--data", str(DATA_DIR), "--network", "mlp",
        "--weights", str(cli_env.weights), "--runs", str(cli_env.run_dir),
        "--per-class", "120", "--epochs", "1",
        "--out", str(tmp_path / "x.spwt"),
    ])
    assert code == 1
    assert "need 120, have 2" in capsys.readouterr().err


# ---------------------------------------------------------------- exit codes


def test_bad_flag_exits_config(capsys):
    assert main(["attack", "--no-such-flag"]) == 1
    assert main([]) == 1
    capsys.readouterr()


def test_help_exits_ok(capsys):
    assert main(["--help"]) == 0
    assert "serve-stub" in capsys.readouterr().out


def test_missing_config_file(capsys, tmp_path):
    assert main(["attack", "--config", str(tmp_path / "nope.json")]) == 1
    assert "error" in capsys.readouterr().err


def test_bad_seed_list(cli_env, capsys):
    code = main([
        "attack", "--network", "mlp", "--weights", str(cli_env.weights),
        "--seeds", "a,b", "--budget", "5",
    ])
    assert code == 1
    assert "comma-separated integers" in capsys.readouterr().err


def test_metrics_on_empty_dir(tmp_path, capsys):
    assert main(["metrics", "--runs", str(tmp_path), "--out",
                 str(tmp_path / "agg.csv")]) == 1
    capsys.readouterr()


def test_export_on_missing_run(tmp_path, capsys):
    assert main(["export", "--run", str(tmp_path / "missing")]) == 1
    capsys.readouterr()


def test_unreachable_oracle_exits_oracle_code(tmp_path, capsys):
    code = main([
        "attack", "--host", "127.0.0.1", "--port", "1",
        "--budget", "5", "--seeds", "0", "--out", str(tmp_path / "run"),
    ])
    assert code == 2
    assert "oracle error" in capsys.readouterr().err


def test_server_death_mid_run_exits_partial(tmp_path, capsys):
    script = tmp_path / "dying_server.py"
    script.write_text(
        "import json, sys\n"
        "count = 0\n"
        "for line in sys.stdin:\n"
        "    msg = json.loads(line)\n"
        "    if msg['op'] == 'hello':\n"
        "        reply = {'op': 'hello', 'num_classes': 2, 'input_shape': [1, 4, 4]}\n"
        "    else:\n"
        "        count += msg['shape'][0]\n"
        "        if count > 30:\n"
        "            sys.exit(1)\n"
        "        reply = {'op': 'probs', 'id': msg['id'],\n"
        "                 'probs': [[0.5, 0.5]] * msg['shape'][0]}\n"
        "    sys.stdout.write(json.dumps(reply) + '\\n')\n"
        "    sys.stdout.flush()\n"
    )
    code = main([
        "attack", "--budget", "50", "--seeds", "0", "--stride", "10",
        "--out", str(tmp_path / "run"),
        "--oracle-cmd", sys.executable, str(script),
    ])
    captured = capsys.readouterr()
    assert code == 3
    assert "FAILED seed 0" in captured.err
    # partial artifacts still land on disk
    assert (tmp_path / "run" / "seed_0" / "records.json").exists()
    assert not (tmp_path / "run" / "aggregate.csv").exists()


def test_serve_stub_tcp_subprocess():
    proc = subprocess.Popen(
        [sys.executable, "-m", "spoofkit.cli", "serve-stub",
         "--num-classes", "4", "--input-shape", "1,5,5"],
        stdout=subprocess.PIPE,
        stderr=subprocess.DEVNULL,
        text=True,
    )
    try:
        banner = proc.stdout.readline().strip()
        assert banner.startswith("listening on ")
        host, port = banner.removeprefix("listening on ").rsplit(":", 1)
        oracle = sk.RemoteOracle.connect_tcp(host, int(port))
        assert oracle.num_classes == 4
        assert oracle.input_shape == (1, 5, 5)
        probs = oracle.predict_one(np.zeros((1, 5, 5), dtype=np.float32))
        assert np.allclose(probs, 0.25)
        oracle.close()
    finally:
        proc.terminate()
        proc.wait(timeout=5)


def test_serve_stub_rejects_bad_shape(capsys):
    assert main(["serve-stub", "--input-shape", "1,28"]) == 1
    assert "input-shape" in capsys.readouterr().err
