"""Run orchestration: directory layout, artifact determinism, exports."""

import csv
import json

import numpy as np
import pytest

import spoofkit as sk
import spoofkit.experiment as experiment
from spoofkit.errors import ConfigError, NotFoundError
from spoofkit.network import Dense, Flatten, NetworkSpec, Softmax


@pytest.fixture()
def tiny_oracle_files(tmp_path):
    """A 3-class builtin network saved to disk, referenced from configs."""
    spec = NetworkSpec((1, 6, 6), (Flatten(), Dense(36, 3), Softmax()))
    weights = sk.init_weights(spec, rng_seed=5)
    weights_path = tmp_path / "tiny.spwt"
    sk.save_weights(weights, weights_path)
    return {
        "backend": "builtin",
        "network": json.loads(spec.to_json()),
        "weights": str(weights_path),
    }


def spoof_config(oracle, **overrides):
    kwargs = dict(attack="spoof", oracle=oracle, seeds=(0, 1), budget=30,
                  checkpoint_stride=10, classifier_id="tiny")
    kwargs.update(overrides)
    return sk.ExperimentConfig(**kwargs)


def test_spoof_run_layout(tmp_path, tiny_oracle_files):
    cfg = spoof_config(tiny_oracle_files)
    out = sk.run_experiment(cfg, output_dir=tmp_path / "run")
    assert out.failures == []
    assert len(out.records) == 2
    assert out.aggregate is not None

    root = out.directory
    assert (root / "config.json").exists()
    assert (root / "aggregate.csv").exists()
    for seed in (0, 1):
        seed_dir = root / f"seed_{seed}"
        for name in ("records.json", "timing.json", "trajectory.csv"):
            assert (seed_dir / name).exists()
        for c in range(3):
            assert (seed_dir / f"class_{c}.png").exists()

    # records on disk carry zeroed runtime; the wall clock lives in timing.json
    on_disk = json.loads((root / "seed_0" / "records.json").read_text())
    assert all(e["runtime_seconds"] == 0.0 for e in on_disk["classes"].values())
    timing = json.loads((root / "seed_0" / "timing.json").read_text())
    assert timing["clock"] == "perf_counter"
    assert timing["wall_seconds"] > 0.0
    # while the in-memory outcome keeps the measurement
    assert all(
        o.runtime_seconds > 0.0 for o in out.records[0].classes.values()
    )


def test_spoof_run_respects_targets(tmp_path, tiny_oracle_files):
    cfg = spoof_config(tiny_oracle_files, targets=(1,), seeds=(0,))
    out = sk.run_experiment(cfg, output_dir=tmp_path / "run")
    assert set(out.records[0].classes) == {1}
    seed_dir = out.directory / "seed_0"
    assert (seed_dir / "class_1.png").exists()
    assert not (seed_dir / "class_0.png").exists()


def test_reruns_are_byte_identical(tmp_path, tiny_oracle_files):
    cfg = spoof_config(tiny_oracle_files)
    a = sk.run_experiment(cfg, output_dir=tmp_path / "a").directory
    b = sk.run_experiment(cfg, output_dir=tmp_path / "b").directory
    for rel in (
        "config.json",
        "seed_0/records.json",
        "seed_0/trajectory.csv",
        "seed_0/class_0.png",
        "seed_0/class_1.png",
        "seed_0/class_2.png",
        "seed_1/records.json",
    ):
        assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel


def test_load_run_records_restores_wall_clock(tmp_path, tiny_oracle_files):
    cfg = spoof_config(tiny_oracle_files, seeds=(0,))
    out = sk.run_experiment(cfg, output_dir=tmp_path / "run")
    records = sk.load_run_records(out.directory)
    assert len(records) == 1
    timing = json.loads((out.directory / "seed_0" / "timing.json").read_text())
    for outcome in records[0].classes.values():
        assert outcome.runtime_seconds == timing["per_class_wall_seconds"] > 0.0


def test_load_run_records_requires_seeds(tmp_path):
    with pytest.raises(NotFoundError):
        sk.load_run_records(tmp_path)


def test_evolve_run_layout(tmp_path, tiny_oracle_files):
    cfg = sk.ExperimentConfig(
        attack="direct", oracle=tiny_oracle_files, seeds=(0,),
        population_size=5, generations=6, classifier_id="tiny",
    )
    out = sk.run_experiment(cfg, output_dir=tmp_path / "run")
    assert out.failures == []
    seed_dir = out.directory / "seed_0"
    assert (seed_dir / "archive.json").exists()
    archive = sk.Archive.load(seed_dir / "archive.json")
    assert archive.num_classes == 3
    # 5 x 6 evaluations spread over 3 classes
    for outcome in out.records[0].classes.values():
        assert outcome.queries == 10.0
    with open(seed_dir / "trajectory.csv", newline="") as fh:
        header = next(csv.reader(fh))
    assert header == ["class", "generation", "queries_so_far", "fitness"]
    assert (out.directory / "aggregate.csv").exists()


def test_evolve_reruns_are_byte_identical(tmp_path, tiny_oracle_files):
    cfg = sk.ExperimentConfig(
        attack="cppn", oracle=tiny_oracle_files, seeds=(0,),
        population_size=4, generations=5, classifier_id="tiny",
    )
    a = sk.run_experiment(cfg, output_dir=tmp_path / "a").directory
    b = sk.run_experiment(cfg, output_dir=tmp_path / "b").directory
    for rel in ("seed_0/records.json", "seed_0/archive.json", "seed_0/trajectory.csv"):
        assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel


def test_failures_suppress_aggregate(tmp_path, tiny_oracle_files, monkeypatch):
    real = experiment.spoof_batch

    def flaky(oracle, configs):
        results = real(oracle, configs)
        results[0].error = "socket dropped"
        return results

    monkeypatch.setattr(experiment, "spoof_batch", flaky)
    cfg = spoof_config(tiny_oracle_files, seeds=(0,))
    out = sk.run_experiment(cfg, output_dir=tmp_path / "run")
    assert out.failures == ["seed 0: socket dropped"]
    assert out.aggregate is None
    assert not (out.directory / "aggregate.csv").exists()
    # partial artifacts are still on disk for inspection
    assert (out.directory / "seed_0" / "records.json").exists()


def test_export_heatmap_rows(tmp_path, tiny_oracle_files):
    cfg = spoof_config(tiny_oracle_files)
    out = sk.run_experiment(cfg, output_dir=tmp_path / "run")
    path = sk.export_heatmap_csv(out.directory)
    assert path.name == "heatmap_seed_0.csv"
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["class", "checkpoint_query", "confidence"]
    body = rows[1:]
    # 3 classes x checkpoints at 0, 10, 20, 30
    assert len(body) == 12
    assert [r[0] for r in body] == sorted(r[0] for r in body)
    assert [int(r[1]) for r in body[:4]] == [0, 10, 20, 30]
    # values are copied verbatim from the per-seed trajectory
    with open(out.directory / "seed_0" / "trajectory.csv", newline="") as fh:
        source = {(r["class"], r["query_index"]): r["confidence"]
                  for r in csv.DictReader(fh)}
    for cls, q, conf in body:
        assert source[(cls, q)] == conf


def test_export_heatmap_selects_seed_and_output(tmp_path, tiny_oracle_files):
    cfg = spoof_config(tiny_oracle_files)
    out = sk.run_experiment(cfg, output_dir=tmp_path / "run")
    target = tmp_path / "custom.csv"
    path = sk.export_heatmap_csv(out.directory, seed=1, out_path=target)
    assert path == target and target.exists()
    with pytest.raises(NotFoundError):
        sk.export_heatmap_csv(out.directory, seed=9)
    with pytest.raises(NotFoundError):
        sk.export_heatmap_csv(tmp_path / "empty")


# ---------------------------------------------------------------- config


def test_config_json_round_trip(tiny_oracle_files):
    cfg = spoof_config(tiny_oracle_files, init=sk.InitMode.UNIFORM_RANDOM,
                       targets=(0, 2), asr_threshold=0.5)
    back = sk.ExperimentConfig.from_json(cfg.to_json())
    assert back == cfg


def test_config_load_from_file(tmp_path, tiny_oracle_files):
    cfg = spoof_config(tiny_oracle_files)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg.to_json()))
    assert sk.ExperimentConfig.load(path) == cfg
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        sk.ExperimentConfig.load(path)


def test_config_rejects_unknown_fields(tiny_oracle_files):
    obj = spoof_config(tiny_oracle_files).to_json()
    obj["budgets"] = 10
    with pytest.raises(ConfigError, match="unknown config fields"):
        sk.ExperimentConfig.from_json(obj)


def test_config_validation(tiny_oracle_files):
    remote = {"backend": "remote", "host": "x", "port": 1}
    with pytest.raises(ConfigError):  # spoof without budget
        sk.ExperimentConfig(attack="spoof", oracle=remote, seeds=(0,))
    with pytest.raises(ConfigError):  # evolution without population/generations
        sk.ExperimentConfig(attack="cppn", oracle=remote, seeds=(0,), budget=5)
    with pytest.raises(ConfigError):  # unknown attack
        sk.ExperimentConfig(attack="fgsm", oracle=remote, seeds=(0,), budget=5)
    with pytest.raises(ConfigError):  # no seeds
        sk.ExperimentConfig(attack="spoof", oracle=remote, seeds=(), budget=5)
    with pytest.raises(ConfigError):  # remote needs host+port xor command
        sk.ExperimentConfig(
            attack="spoof", seeds=(0,), budget=5,
            oracle={"backend": "remote", "host": "x", "port": 1, "command": ["x"]},
        )
    with pytest.raises(ConfigError):  # builtin needs network and weights
        sk.ExperimentConfig(
            attack="spoof", seeds=(0,), budget=5, oracle={"backend": "builtin"},
        )
    with pytest.raises(ConfigError):  # unknown backend
        sk.ExperimentConfig(
            attack="spoof", seeds=(0,), budget=5, oracle={"backend": "http"},
        )
    with pytest.raises(ConfigError):  # wrong schema version
        sk.ExperimentConfig(
            attack="spoof", oracle=remote, seeds=(0,), budget=5, schema_version=2,
        )


def test_config_labels(tiny_oracle_files):
    assert spoof_config(tiny_oracle_files).label == "tiny"
    unnamed = spoof_config(tiny_oracle_files, classifier_id="")
    assert unnamed.label == "builtin-custom"
    named = sk.ExperimentConfig(
        attack="spoof", seeds=(0,), budget=5, classifier_id="",
        oracle={"backend": "builtin", "network": "mlp", "weights": "w.spwt"},
    )
    assert named.label == "builtin-mlp"
    remote = sk.ExperimentConfig(
        attack="spoof", seeds=(0,), budget=5, classifier_id="",
        oracle={"backend": "remote", "host": "h", "port": 9},
    )
    assert remote.label == "remote"


def test_default_output_dir_env_override(tiny_oracle_files, monkeypatch, tmp_path):
    cfg = spoof_config(tiny_oracle_files)
    monkeypatch.setenv(experiment.OUTPUT_ROOT_ENV, str(tmp_path / "elsewhere"))
    assert experiment.default_output_dir(cfg) == tmp_path / "elsewhere" / "spoof_tiny"
    monkeypatch.delenv(experiment.OUTPUT_ROOT_ENV)
    assert experiment.default_output_dir(cfg) == experiment.Path("runs") / "spoof_tiny"


def test_resolve_network():
    assert sk.resolve_network("mlp").num_classes == 10
    assert sk.resolve_network("lenet").num_classes == 10
    with pytest.raises(ConfigError):
        sk.resolve_network("vgg")
    spec = NetworkSpec((1, 6, 6), (Flatten(), Dense(36, 3), Softmax()))
    assert sk.resolve_network(spec.to_json()) == spec  # JSON text
    assert sk.resolve_network(json.loads(spec.to_json())) == spec  # parsed document
