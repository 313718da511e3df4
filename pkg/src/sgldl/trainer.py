"""Incremental training protocol.

Per task, in order: snapshot the old model, compute its outputs on the task's
training data, grow the correlation matrix and node embeddings, run mini-batch
SGD on the combined loss, then store the task's graph embedding for the next
task's relationship constraint. Evaluation restricts ground truth (and, for
earlier-task restrictions, predictions) to the learned labels and renormalizes.

A training run owns its state exclusively; states returned by `run_task` are
fresh objects, so snapshots stay frozen by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import TrainConfig
from .datagen import InstanceSet, Stream, TaskSpec
from .distributions import LOG_CLAMP, LabelSpace, softmax
from .extractor import ExtractorParams, extract, extract_backward, init_extractor
from .graph import (
    GcnParams,
    adjacency_from_scm,
    gcn_forward,
    init_gcn_params,
    init_node_embeddings,
)
from .losses import LossWeights, mean_canberra_loss, total_loss
from .scm import ScalableCorrelationMatrix, compute_E, compute_M, compute_R, extend_scm, initial_scm

_EXTRACTOR_TAG = 31
_GCN_TAG = 32
_HEAD_TAG = 33
_SHUFFLE_TAG = 34


class TrainingDivergedError(RuntimeError):
    """Mini-batch loss became non-finite; training aborts with diagnostics."""

    def __init__(self, task_index: int, epoch: int, batch_indices):
        self.task_index = task_index
        self.epoch = epoch
        self.batch_indices = list(int(i) for i in batch_indices)
        super().__init__(
            f"non-finite loss at task {task_index}, epoch {epoch}, "
            f"batch indices {self.batch_indices}"
        )


@dataclass
class ModelState:
    """Graph-classifier model plus everything the next task needs."""

    task_index: int
    labels: LabelSpace
    extractor: ExtractorParams
    gcn: GcnParams
    h0: np.ndarray
    scm: ScalableCorrelationMatrix | None
    stored_g: np.ndarray | None
    snapshot: "ModelState | None"
    input_dim: int
    node_dim: int
    graph_hidden: int
    model_dim: int
    seed: int
    scm_threshold: float | None

    def frozen_copy(self) -> "ModelState":
        """Deep copy without the nested snapshot (one level is enough)."""
        return ModelState(
            task_index=self.task_index,
            labels=self.labels,
            extractor=self.extractor.clone(),
            gcn=self.gcn.clone(),
            h0=self.h0.copy(),
            scm=ScalableCorrelationMatrix(
                self.scm.labels, self.scm.entries.copy(), self.scm.block_boundary
            )
            if self.scm is not None
            else None,
            stored_g=self.stored_g.copy() if self.stored_g is not None else None,
            snapshot=None,
            input_dim=self.input_dim,
            node_dim=self.node_dim,
            graph_hidden=self.graph_hidden,
            model_dim=self.model_dim,
            seed=self.seed,
            scm_threshold=self.scm_threshold,
        )


@dataclass
class NaiveState:
    """Fine-tune control: same extractor, dense per-label linear head."""

    task_index: int
    labels: LabelSpace
    extractor: ExtractorParams
    head: np.ndarray  # (labels, model_dim), one row per label
    input_dim: int
    model_dim: int
    seed: int


@dataclass
class MetricRecord:
    dis1: float  # Euclidean distance
    dis2: float  # KL divergence
    sim1: float  # intersection
    sim2: float  # fidelity
    skipped: int
    evaluated: int


@dataclass
class TaskResult:
    task_index: int
    labels_learned: int
    metrics: MetricRecord
    trace: list[float]


def fresh_state(input_dim: int, cfg: TrainConfig) -> ModelState:
    ext_rng = np.random.default_rng([cfg.seed, _EXTRACTOR_TAG])
    gcn_rng = np.random.default_rng([cfg.seed, _GCN_TAG])
    return ModelState(
        task_index=0,
        labels=LabelSpace(()),
        extractor=init_extractor(input_dim, cfg.model_dim, ext_rng),
        gcn=init_gcn_params(cfg.node_dim, cfg.graph_hidden, cfg.model_dim, gcn_rng),
        h0=np.zeros((0, cfg.node_dim)),
        scm=None,
        stored_g=None,
        snapshot=None,
        input_dim=input_dim,
        node_dim=cfg.node_dim,
        graph_hidden=cfg.graph_hidden,
        model_dim=cfg.model_dim,
        seed=cfg.seed,
        scm_threshold=cfg.scm_threshold,
    )


def fresh_naive_state(input_dim: int, cfg: TrainConfig) -> NaiveState:
    ext_rng = np.random.default_rng([cfg.seed, _EXTRACTOR_TAG])
    return NaiveState(
        task_index=0,
        labels=LabelSpace(()),
        extractor=init_extractor(input_dim, cfg.model_dim, ext_rng),
        head=np.zeros((0, cfg.model_dim)),
        input_dim=input_dim,
        model_dim=cfg.model_dim,
        seed=cfg.seed,
    )


def graph_embedding(state: ModelState) -> np.ndarray:
    if state.scm is None:
        raise ValueError("model has not learned any task yet")
    a_hat = adjacency_from_scm(state.scm, state.scm_threshold)
    h, _ = gcn_forward(a_hat, state.h0, state.gcn)
    return h


def predict_probs(state, x) -> np.ndarray:
    """Distribution over the model's cumulative labels; accepts a batch."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    feats, _ = extract(x, state.extractor)
    if isinstance(state, NaiveState):
        scores = feats @ state.head.T
    else:
        scores = feats @ graph_embedding(state).T
    return softmax(scores)


def _batches(n: int, batch_size: int, order):
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def _clip_scale(grad_arrays, threshold: float | None) -> float:
    if threshold is None:
        return 1.0
    total = np.sqrt(sum(float((g**2).sum()) for g in grad_arrays))
    if total <= threshold:
        return 1.0
    return threshold / total


def run_task(
    state: ModelState,
    task: TaskSpec,
    cfg: TrainConfig,
    use_compensation: bool = True,
) -> tuple[ModelState, list[float]]:
    """Train one task; returns the new state and the per-epoch loss trace."""
    if task.index != state.task_index + 1:
        raise ValueError(
            f"task index mismatch: state is at {state.task_index}, task is {task.index}"
        )
    first_task = state.task_index == 0
    if not first_task and (state.scm is None or state.stored_g is None):
        raise ValueError("missing old model state for an incremental task")

    old = None if first_task else state.frozen_copy()
    old_outputs = None if first_task else predict_probs(old, task.train.x)

    c_prev = len(state.labels)
    new_degrees = task.train.y[:, c_prev:]
    m_block = compute_M(new_degrees)
    if first_task:
        scm_t = initial_scm(m_block, task.new_labels)
    else:
        old_degrees = task.train.y[:, :c_prev]
        e_block = compute_E(new_degrees, old_degrees, old_outputs)
        r_block = compute_R(new_degrees, old_degrees, old_outputs)
        scm_t = extend_scm(state.scm, m_block, e_block, r_block, task.new_labels)

    h0 = init_node_embeddings(task.cumulative, cfg.node_dim, state.seed)
    a_hat = adjacency_from_scm(scm_t, cfg.scm_threshold)
    extractor = state.extractor.clone()
    gcn = state.gcn.clone()
    weights = LossWeights(nc=cfg.lambda_nc, dt=cfg.lambda_dt, rp=cfg.lambda_rp)
    g_prev = state.stored_g

    n = task.train.x.shape[0]
    shuffle_rng = np.random.default_rng([cfg.seed, _SHUFFLE_TAG, task.index])
    trace: list[float] = []
    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(n)
        epoch_losses = []
        for idx in _batches(n, cfg.batch_size, order):
            result = total_loss(
                task.train.x[idx],
                task.train.y[idx],
                extractor=extractor,
                gcn=gcn,
                h0=h0,
                a_hat=a_hat,
                weights=weights,
                new_start=c_prev,
                old_outputs=None if old_outputs is None else old_outputs[idx],
                g_prev=g_prev,
                use_compensation=use_compensation,
            )
            if not np.isfinite(result.value):
                raise TrainingDivergedError(task.index, epoch, idx)
            grads = result.extractor_grads.arrays() + (
                result.gcn_grads.w1,
                result.gcn_grads.w2,
            )
            scale = cfg.learning_rate * _clip_scale(grads, cfg.clip_threshold)
            for p, g in zip(extractor.arrays(), result.extractor_grads.arrays()):
                p -= scale * g
            gcn.w1 -= scale * result.gcn_grads.w1
            gcn.w2 -= scale * result.gcn_grads.w2
            epoch_losses.append(result.value)
        trace.append(float(np.mean(epoch_losses)) if epoch_losses else 0.0)

    stored_g, _ = gcn_forward(a_hat, h0, gcn)
    new_state = ModelState(
        task_index=task.index,
        labels=task.cumulative,
        extractor=extractor,
        gcn=gcn,
        h0=h0,
        scm=scm_t,
        stored_g=stored_g,
        snapshot=old,
        input_dim=state.input_dim,
        node_dim=state.node_dim,
        graph_hidden=state.graph_hidden,
        model_dim=state.model_dim,
        seed=state.seed,
        scm_threshold=cfg.scm_threshold,
    )
    return new_state, trace


def _extend_head(head: np.ndarray, new_labels: LabelSpace, model_dim: int, seed: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(model_dim)
    rows = [
        np.random.default_rng([seed, _HEAD_TAG, lid]).uniform(-bound, bound, model_dim)
        for lid in new_labels
    ]
    return np.vstack([head, np.array(rows)]) if head.size else np.array(rows)


def run_naive_task(
    state: NaiveState, task: TaskSpec, cfg: TrainConfig
) -> tuple[NaiveState, list[float]]:
    """Fine-tune the dense-head control on one task: plain mean Canberra loss,
    no compensation, distillation, or graph."""
    if task.index != state.task_index + 1:
        raise ValueError(
            f"task index mismatch: state is at {state.task_index}, task is {task.index}"
        )
    extractor = state.extractor.clone()
    head = _extend_head(state.head.copy(), task.new_labels, state.model_dim, state.seed)

    n = task.train.x.shape[0]
    shuffle_rng = np.random.default_rng([cfg.seed, _SHUFFLE_TAG, task.index])
    trace: list[float] = []
    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(n)
        epoch_losses = []
        for idx in _batches(n, cfg.batch_size, order):
            feats, ext_cache = extract(task.train.x[idx], extractor)
            probs = softmax(feats @ head.T)
            value, dscores = mean_canberra_loss(probs, task.train.y[idx])
            if not np.isfinite(value):
                raise TrainingDivergedError(task.index, epoch, idx)
            ext_grads, _ = extract_backward(ext_cache, dscores @ head)
            dhead = dscores.T @ feats
            grads = ext_grads.arrays() + (dhead,)
            scale = cfg.learning_rate * _clip_scale(grads, cfg.clip_threshold)
            for p, g in zip(extractor.arrays(), ext_grads.arrays()):
                p -= scale * g
            head -= scale * dhead
            epoch_losses.append(value)
        trace.append(float(np.mean(epoch_losses)) if epoch_losses else 0.0)

    new_state = NaiveState(
        task_index=task.index,
        labels=task.cumulative,
        extractor=extractor,
        head=head,
        input_dim=state.input_dim,
        model_dim=state.model_dim,
        seed=state.seed,
    )
    return new_state, trace


def evaluate(state, test: InstanceSet, learned_count: int) -> MetricRecord:
    """Restricted-label evaluation against the held-out test set.

    Ground truth is restricted to the first `learned_count` labels and
    renormalized (zero-mass instances are skipped and counted); predictions
    are restricted and renormalized the same way, which is the identity when
    the restriction equals the model's own label set.
    """
    c_model = len(state.labels)
    if not 0 < learned_count <= c_model:
        raise ValueError(
            f"restriction to {learned_count} labels not covered by model with {c_model}"
        )
    probs = predict_probs(state, test.x)
    pred = probs[:, :learned_count]
    pred = pred / pred.sum(axis=1, keepdims=True)

    truth_mass = test.y[:, :learned_count].sum(axis=1)
    mask = truth_mass > 0.0
    skipped = int((~mask).sum())
    if not mask.any():
        raise ValueError("no test instance has mass on the learned labels")
    t = test.y[mask, :learned_count] / truth_mass[mask, None]
    p = pred[mask]

    dis1 = np.sqrt(((t - p) ** 2).sum(axis=1))
    p_clamped = np.maximum(p, LOG_CLAMP)
    dis2 = (t * np.log(np.where(t > 0.0, t, 1.0) / p_clamped)).sum(axis=1)
    sim1 = np.minimum(t, p).sum(axis=1)
    sim2 = np.sqrt(t * p).sum(axis=1)
    return MetricRecord(
        dis1=float(dis1.mean()),
        dis2=float(dis2.mean()),
        sim1=float(sim1.mean()),
        sim2=float(sim2.mean()),
        skipped=skipped,
        evaluated=int(mask.sum()),
    )


def method_variant(method: str, cfg: TrainConfig) -> tuple[TrainConfig, bool]:
    """Effective config and compensation flag for an ablation variant."""
    if method == "w/oLDT":
        return cfg.model_copy(update={"lambda_dt": 0.0}), True
    if method == "w/oLRP":
        return cfg.model_copy(update={"lambda_rp": 0.0}), True
    if method == "w/oLNC":
        return cfg, False
    if method == "sgldl":
        return cfg, True
    raise ValueError(f"unknown method variant {method!r}")


def run_sequence(
    stream: Stream, cfg: TrainConfig, method: str = "sgldl"
) -> tuple[list[TaskResult], list]:
    """Train every task in order, evaluating on the cumulative test set after
    each; returns per-task results and the per-task states."""
    if method == "naive":
        state = fresh_naive_state(stream.config.feature_dim, cfg)
        runner = lambda s, task: run_naive_task(s, task, cfg)  # noqa: E731
    else:
        eff_cfg, use_comp = method_variant(method, cfg)
        state = fresh_state(stream.config.feature_dim, eff_cfg)
        runner = lambda s, task: run_task(s, task, eff_cfg, use_compensation=use_comp)  # noqa: E731

    results: list[TaskResult] = []
    states: list = []
    for task in stream.tasks:
        state, trace = runner(state, task)
        record = evaluate(state, stream.cumulative_test(task.index), len(task.cumulative))
        results.append(
            TaskResult(
                task_index=task.index,
                labels_learned=len(task.cumulative),
                metrics=record,
                trace=trace,
            )
        )
        states.append(state)
    return results, states
