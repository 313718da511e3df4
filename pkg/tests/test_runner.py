import csv

import pytest

import sgldl.runner as runner_mod
from sgldl.config import ExperimentConfig
from helpers import tiny_experiment_config


@pytest.fixture()
def dataset(tmp_path):
    cfg = ExperimentConfig.model_validate(tiny_experiment_config())
    path, sha, records = runner_mod.generate_dataset(cfg, tmp_path / "data")
    assert records == 2 * (80 + 40)
    return cfg, path


def test_hash_pin_accepts_matching_digest(tmp_path, dataset):
    cfg, path = dataset
    import hashlib

    digest = hashlib.sha256(open(path, "rb").read()).hexdigest()
    pinned = cfg.model_copy(update={"dataset_sha256": digest})
    result = runner_mod.run_experiment(pinned, path, tmp_path / "run", workers=1)
    assert result.failures == []
    assert len(result.rows) == 2


def test_failed_cell_writes_marker_row(tmp_path, dataset, monkeypatch):
    cfg, path = dataset
    cfg = cfg.model_copy(update={"methods": ["sgldl", "naive"]})
    real = runner_mod.run_sequence

    def flaky(stream, train_cfg, method):
        if method == "naive":
            raise RuntimeError("synthetic cell failure")
        return real(stream, train_cfg, method)

    monkeypatch.setattr(runner_mod, "run_sequence", flaky)
    result = runner_mod.run_experiment(cfg, path, tmp_path / "run", workers=1)
    assert result.failures == [
        {"method": "naive", "seed": 1, "error": "synthetic cell failure"}
    ]
    # completed rows are flushed, the failed cell leaves a marker row
    with open(result.metrics_csv) as fh:
        fh.readline()
        rows = list(csv.DictReader(fh))
    assert [r["method"] for r in rows] == ["sgldl", "sgldl", "naive"]
    marker = rows[-1]
    assert marker["task_index"] == "-1"
    assert marker["dis1"] == "nan"
    assert marker["skipped_instances"] == "-1"


def test_evaluate_checkpoint_task_bounds(tmp_path, dataset):
    cfg, path = dataset
    result = runner_mod.run_experiment(cfg, path, tmp_path / "run", workers=1)
    ckpt = result.checkpoints[-1]
    with pytest.raises(ValueError):
        runner_mod.evaluate_checkpoint(ckpt, path, 0)
    with pytest.raises(ValueError):
        runner_mod.evaluate_checkpoint(ckpt, path, 9)
