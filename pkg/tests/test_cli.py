import json

import pytest

from app.main import main


@pytest.fixture
def fast_config_file(tmp_path):
    path = tmp_path / "pipeline.json"
    path.write_text(json.dumps({
        "initial_window_T": 120.0,
        "max_iterations": 2,
        "forest": {"n_trees": 5, "max_depth": 6},
    }))
    return str(path)


def _simulate(out_dir, *extra):
    return main(["simulate", "--out-dir", str(out_dir), "--identities", "30", "--duration", "600", *extra])


def test_simulate_train_evaluate_plots(tmp_path, fast_config_file):
    out = tmp_path / "out"
    assert _simulate(out, "--seed", "4", "--split-at", "400") == 0
    assert (out / "events.jsonl").exists()
    assert (out / "events.gt.json").exists()
    assert (out / "events_test.jsonl").exists()

    assert main(["train", "--out-dir", str(out), "--config", fast_config_file]) == 0
    for name in ("topology.json", "cam_topology.json", "results_train.json", "report_train.json", "timings.json"):
        assert (out / name).exists(), name

    assert main(["evaluate", "--out-dir", str(out), "--config", fast_config_file]) == 0
    metrics = json.loads((out / "metrics.json").read_text())
    assert "comparisons" in metrics
    assert "train" in metrics["wall_time_seconds"]

    assert main(["test", "--out-dir", str(out), "--config", fast_config_file]) == 0
    assert (out / "results_test.json").exists()

    assert main(["dump-plots", "--out-dir", str(out)]) == 0
    assert (out / "plots").is_dir()


def test_same_seed_gives_identical_events(tmp_path):
    assert _simulate(tmp_path / "a", "--seed", "11") == 0
    assert _simulate(tmp_path / "b", "--seed", "11") == 0
    assert (tmp_path / "a" / "events.jsonl").read_bytes() == (tmp_path / "b" / "events.jsonl").read_bytes()


def test_missing_events_file_is_reported(tmp_path, capsys):
    missing = tmp_path / "nowhere.jsonl"
    assert main(["train", "--out-dir", str(tmp_path), "--events", str(missing)]) == 1
    err = capsys.readouterr().err
    assert err.startswith("error: train:")
    assert "nowhere.jsonl" in err


def test_invalid_configuration_is_reported(tmp_path, capsys):
    config = tmp_path / "bad.json"
    config.write_text(json.dumps({"theta_sim": 1.5}))
    _simulate(tmp_path)
    assert main(["train", "--out-dir", str(tmp_path), "--config", str(config)]) == 1
    assert "invalid configuration: theta_sim" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [["nonsense"], ["simulate", "--no-such-flag"], []])
def test_usage_errors_exit_with_two(argv):
    assert main(argv) == 2


def test_unparsable_configuration_is_reported(tmp_path, capsys):
    config = tmp_path / "broken.json"
    config.write_text("{not json")
    _simulate(tmp_path)
    assert main(["train", "--out-dir", str(tmp_path), "--config", str(config)]) == 1
    err = capsys.readouterr().err
    assert err.startswith("error: train:")
    assert "broken.json" in err


def test_events_with_bad_encoding_are_reported(tmp_path, capsys):
    events = tmp_path / "garbled.jsonl"
    events.write_bytes(b"\xff\xfe\n")
    assert main(["train", "--out-dir", str(tmp_path), "--events", str(events)]) == 1
    err = capsys.readouterr().err
    assert "garbled.jsonl" in err
    assert "line 1" in err
