"""Synthetic label-incremental stream.

Each instance is an age-like center mu, a feature vector of radial-basis
responses to mu (plus Gaussian noise), and a discretized-Gaussian label
distribution centered at mu. Tasks introduce equal disjoint slices of the
label range. A task's instances (train and held-out test) are centered on its
new labels; training targets cover the task's cumulative labels, while test
targets cover the full label range and are restricted to the learned labels
at evaluation time. The cumulative test set after task t is the union of the
test partitions of tasks 1..t.

Generation is bit-reproducible: every instance draws from its own generator
keyed by (seed, domain, task, index), so parallel generation would produce
the same stream as serial.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .config import StreamConfig, config_hash
from .distributions import LabelSpace, label_range

RBF_WIDTH = 2.0

_MU_TAG = 21
_FEATURE_TAG = 22
_TRAIN_DOMAIN = 1
_TEST_DOMAIN = 2

STREAM_KIND = "ildl-stream"
STREAM_VERSION = 1


@dataclass
class InstanceSet:
    x: np.ndarray  # (n, feature_dim)
    y: np.ndarray  # (n, label count of the split's target space)
    mu: np.ndarray  # (n,)


@dataclass
class TaskSpec:
    index: int  # 1-based position in the sequence
    new_labels: LabelSpace
    cumulative: LabelSpace
    train: InstanceSet  # targets over `cumulative`
    test: InstanceSet  # targets over the full label range


@dataclass
class Stream:
    config: StreamConfig
    tasks: list[TaskSpec]

    def cumulative_test(self, upto_task: int) -> InstanceSet:
        """Union of the test partitions of tasks 1..upto_task."""
        if not 1 <= upto_task <= len(self.tasks):
            raise ValueError(f"task index {upto_task} outside 1..{len(self.tasks)}")
        parts = [t.test for t in self.tasks[:upto_task]]
        return InstanceSet(
            x=np.concatenate([p.x for p in parts]),
            y=np.concatenate([p.y for p in parts]),
            mu=np.concatenate([p.mu for p in parts]),
        )


def gaussian_distribution(mu: int, labels, sigma: float) -> np.ndarray:
    """Discretized Gaussian over the given label ids, renormalized to sum 1."""
    ids = np.asarray(list(labels), dtype=np.float64)
    if ids.size == 0:
        raise ValueError("empty label space")
    if sigma <= 0.0:
        raise ValueError("sigma must be positive")
    w = np.exp(-((ids - mu) ** 2) / (2.0 * sigma**2))
    return w / w.sum()


def rbf_centers(total_labels: int, feature_dim: int) -> np.ndarray:
    """Fixed response centers spanning the label range."""
    return np.linspace(0.0, total_labels - 1.0, feature_dim)


def gen_feature(mu: int, cfg: StreamConfig, draw_key) -> np.ndarray:
    """Radial-basis responses to mu plus seeded Gaussian noise.

    draw_key identifies the draw; the same (seed, mu, draw_key) always yields
    the same vector.
    """
    centers = rbf_centers(cfg.total_labels, cfg.feature_dim)
    clean = np.exp(-((mu - centers) ** 2) / (2.0 * RBF_WIDTH**2))
    rng = np.random.default_rng([cfg.seed, _FEATURE_TAG, *draw_key])
    return clean + rng.normal(0.0, cfg.noise, size=cfg.feature_dim)


def _draw_mu(cfg: StreamConfig, n_choices: int, draw_key) -> int:
    rng = np.random.default_rng([cfg.seed, _MU_TAG, *draw_key])
    return int(rng.integers(0, n_choices))


def _instances(cfg, count, mu_base, mu_span, target_labels, domain, task_index) -> InstanceSet:
    x = np.empty((count, cfg.feature_dim))
    y = np.empty((count, len(target_labels)))
    mus = np.empty(count, dtype=np.int64)
    for i in range(count):
        mu = mu_base + _draw_mu(cfg, mu_span, (domain, task_index, i))
        mus[i] = mu
        x[i] = gen_feature(mu, cfg, (domain, task_index, i))
        y[i] = gaussian_distribution(mu, target_labels, cfg.sigma)
    return InstanceSet(x=x, y=y, mu=mus)


def build_stream(cfg: StreamConfig) -> Stream:
    full = label_range(cfg.total_labels)
    per_task = cfg.total_labels // cfg.tasks
    tasks = []
    for t in range(1, cfg.tasks + 1):
        c_t = t * per_task
        cumulative = full.prefix(c_t)
        new_labels = LabelSpace(full.ids[c_t - per_task : c_t])
        base = c_t - per_task
        tasks.append(
            TaskSpec(
                index=t,
                new_labels=new_labels,
                cumulative=cumulative,
                train=_instances(cfg, cfg.train_per_task, base, per_task, cumulative, _TRAIN_DOMAIN, t),
                test=_instances(cfg, cfg.test_per_task, base, per_task, full, _TEST_DOMAIN, t),
            )
        )
    return Stream(config=cfg, tasks=tasks)


def write_stream_jsonl(stream: Stream, path) -> str:
    """Write the stream as JSON lines; returns the file's sha256 hex digest.

    The header record carries the generating config for provenance; floats
    round-trip bit-exactly through json.
    """
    path = Path(path)
    lines = [
        json.dumps(
            {
                "kind": STREAM_KIND,
                "version": STREAM_VERSION,
                "artifact_version": __version__,
                "config_sha256": config_hash(stream.config),
                "config": stream.config.model_dump(),
            },
            sort_keys=True,
            separators=(",", ":"),
        )
    ]
    for task in stream.tasks:
        for split, part in (("train", task.train), ("test", task.test)):
            for i in range(part.x.shape[0]):
                lines.append(
                    json.dumps(
                        {
                            "task": task.index,
                            "split": split,
                            "mu": int(part.mu[i]),
                            "x": part.x[i].tolist(),
                            "d": part.y[i].tolist(),
                        },
                        separators=(",", ":"),
                    )
                )
    data = ("\n".join(lines) + "\n").encode()
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(data)
    tmp.replace(path)
    return hashlib.sha256(data).hexdigest()


def read_stream_jsonl(path) -> Stream:
    path = Path(path)
    with path.open() as fh:
        header_line = fh.readline()
        if not header_line.strip():
            raise ValueError(f"{path}: empty dataset file")
        header = json.loads(header_line)
        if header.get("kind") != STREAM_KIND:
            raise ValueError(f"{path}: not a stream file")
        if header.get("version") != STREAM_VERSION:
            raise ValueError(f"{path}: unsupported stream version {header.get('version')}")
        cfg = StreamConfig.model_validate(header["config"])
        records: dict[tuple[int, str], list[dict]] = {}
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            rec = json.loads(line)
            if rec.get("split") not in ("train", "test"):
                raise ValueError(f"{path}:{lineno}: unknown split {rec.get('split')!r}")
            records.setdefault((rec["task"], rec["split"]), []).append(rec)

    def to_set(recs) -> InstanceSet:
        return InstanceSet(
            x=np.array([r["x"] for r in recs]),
            y=np.array([r["d"] for r in recs]),
            mu=np.array([r["mu"] for r in recs], dtype=np.int64),
        )

    full = label_range(cfg.total_labels)
    per_task = cfg.total_labels // cfg.tasks
    tasks = []
    for t in range(1, cfg.tasks + 1):
        train_recs = records.get((t, "train"))
        test_recs = records.get((t, "test"))
        if not train_recs or not test_recs:
            raise ValueError(f"{path}: missing records for task {t}")
        c_t = t * per_task
        tasks.append(
            TaskSpec(
                index=t,
                new_labels=LabelSpace(full.ids[c_t - per_task : c_t]),
                cumulative=full.prefix(c_t),
                train=to_set(train_recs),
                test=to_set(test_recs),
            )
        )
    return Stream(config=cfg, tasks=tasks)
