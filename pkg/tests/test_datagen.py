import json
import math

import numpy as np
import pytest

from sgldl.config import StreamConfig
from sgldl.datagen import (
    build_stream,
    gaussian_distribution,
    gen_feature,
    read_stream_jsonl,
    rbf_centers,
    write_stream_jsonl,
)
from sgldl.distributions import label_range


def small_cfg(**kw):
    base = dict(
        total_labels=6, tasks=2, sigma=3.0, train_per_task=30, test_per_task=20,
        feature_dim=8, noise=0.05, seed=0,
    )
    base.update(kw)
    return StreamConfig(**base)


def test_gaussian_symmetry_and_limits():
    labels = label_range(5)
    d = gaussian_distribution(2, labels, 3.0)
    assert np.abs(d - d[::-1]).max() <= 1e-15
    narrow = gaussian_distribution(2, labels, 0.1)
    assert narrow[2] >= 0.999
    # direct exponentiate-and-normalize oracle
    w = [math.exp(-((j - 2) ** 2) / (2 * 9.0)) for j in range(5)]
    expected = np.array(w) / sum(w)
    assert np.abs(d - expected).max() <= 1e-15
    with pytest.raises(ValueError):
        gaussian_distribution(2, [], 3.0)


def test_gen_feature_determinism_and_peak():
    cfg = small_cfg(noise=0.0)
    a = gen_feature(3, cfg, (1, 1, 0))
    b = gen_feature(3, cfg, (1, 1, 0))
    assert np.array_equal(a, b)
    centers = rbf_centers(cfg.total_labels, cfg.feature_dim)
    assert a.argmax() == int(np.abs(centers - 3).argmin())
    noisy_cfg = small_cfg(noise=0.2)
    n1 = gen_feature(3, noisy_cfg, (1, 1, 0))
    n2 = gen_feature(3, noisy_cfg, (1, 1, 1))
    assert not np.array_equal(n1, n2)


def test_stream_structure():
    cfg = small_cfg()
    stream = build_stream(cfg)
    assert len(stream.tasks) == 2
    t1, t2 = stream.tasks
    assert t1.new_labels.ids == (0, 1, 2)
    assert t2.new_labels.ids == (3, 4, 5)
    assert t1.cumulative.is_prefix_of(t2.cumulative)
    assert t1.train.y.shape == (30, 3)
    assert t2.train.y.shape == (30, 6)
    assert t1.test.y.shape == (20, 6)  # test targets span the full range
    # train centers stay within the task's new labels
    assert set(t1.train.mu) <= {0, 1, 2}
    assert set(t2.train.mu) <= {3, 4, 5}
    assert set(t1.test.mu) <= {0, 1, 2}
    # targets sum to one over exactly the cumulative labels
    assert np.abs(t2.train.y.sum(axis=1) - 1.0).max() <= 1e-12
    assert t2.train.y.min() >= 0.0


def test_single_task_stream():
    stream = build_stream(small_cfg(tasks=1, total_labels=6))
    assert len(stream.tasks) == 1
    assert stream.tasks[0].cumulative.ids == tuple(range(6))


def test_cumulative_test_union():
    stream = build_stream(small_cfg())
    part = stream.cumulative_test(1)
    assert part.x.shape[0] == 20
    both = stream.cumulative_test(2)
    assert both.x.shape[0] == 40
    assert np.array_equal(both.x[:20], stream.tasks[0].test.x)
    with pytest.raises(ValueError):
        stream.cumulative_test(3)


def test_stream_reproducible():
    a = build_stream(small_cfg())
    b = build_stream(small_cfg())
    for ta, tb in zip(a.tasks, b.tasks):
        assert np.array_equal(ta.train.x, tb.train.x)
        assert np.array_equal(ta.train.y, tb.train.y)
        assert np.array_equal(ta.test.x, tb.test.x)


def test_distinct_centers_have_distinct_features():
    cfg = small_cfg(noise=0.0)
    feats = [gen_feature(mu, cfg, (1, 1, 0)) for mu in range(cfg.total_labels)]
    for i in range(len(feats)):
        for j in range(i + 1, len(feats)):
            assert np.abs(feats[i] - feats[j]).max() > 1e-6


def test_jsonl_round_trip(tmp_path):
    stream = build_stream(small_cfg())
    path = tmp_path / "stream.jsonl"
    sha1 = write_stream_jsonl(stream, path)
    sha2 = write_stream_jsonl(stream, path)
    assert sha1 == sha2
    back = read_stream_jsonl(path)
    assert back.config == stream.config
    for ta, tb in zip(stream.tasks, back.tasks):
        assert np.array_equal(ta.train.x, tb.train.x)
        assert np.array_equal(ta.train.y, tb.train.y)
        assert np.array_equal(ta.train.mu, tb.train.mu)
        assert np.array_equal(ta.test.y, tb.test.y)


def test_jsonl_rejects_garbage(tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text(json.dumps({"kind": "something-else"}) + "\n")
    with pytest.raises(ValueError):
        read_stream_jsonl(bad)
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    with pytest.raises(ValueError):
        read_stream_jsonl(empty)


def test_divisibility_validation():
    with pytest.raises(ValueError):
        StreamConfig(total_labels=7, tasks=2)
