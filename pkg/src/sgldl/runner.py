"""Experiment orchestration: dataset files, (method, seed) cells, metric CSVs,
checkpoints, and the correlation-matrix export.

Every output file starts with a provenance comment (config hash, seeds,
artifact version) and is written atomically; reruns with the same config are
byte-identical.
"""

from __future__ import annotations

import csv
import hashlib
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .checkpoint import load_checkpoint, save_checkpoint
from .config import ExperimentConfig, config_hash
from .datagen import Stream, build_stream, read_stream_jsonl, write_stream_jsonl
from .scm import heatmap_rows, serialize_scm
from .trainer import ModelState, TaskResult, evaluate, run_sequence

CSV_COLUMNS = (
    "method",
    "seed",
    "task_index",
    "labels_learned",
    "dis1",
    "dis2",
    "sim1",
    "sim2",
    "skipped_instances",
)

DATASET_FILENAME = "dataset.jsonl"
METRICS_FILENAME = "metrics.csv"


@dataclass
class CellResult:
    method: str
    seed: int
    results: list[TaskResult]
    checkpoints: list[str]
    error: str | None = None


@dataclass
class ExperimentResult:
    metrics_csv: str
    rows: list[dict]
    checkpoints: list[str]
    failures: list[dict]


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)


def _provenance_line(cfg_hash: str, seeds) -> str:
    seed_list = ",".join(str(s) for s in seeds)
    return f"# ildl-lab v{__version__} config_sha256={cfg_hash} seeds={seed_list}"


def generate_dataset(cfg: ExperimentConfig, out_dir) -> tuple[str, str, int]:
    """Build the stream from cfg.stream and write it; returns (path, sha256, records)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stream = build_stream(cfg.stream)
    path = out / DATASET_FILENAME
    sha = write_stream_jsonl(stream, path)
    records = cfg.stream.tasks * (cfg.stream.train_per_task + cfg.stream.test_per_task)
    return str(path), sha, records


def _safe_method_name(method: str) -> str:
    return method.replace("/", "-")


def _run_cell(method: str, seed: int, stream: Stream, cfg: ExperimentConfig, ckpt_dir: Path, cfg_hash: str) -> CellResult:
    train_cfg = cfg.train.model_copy(update={"seed": seed})
    try:
        results, states = run_sequence(stream, train_cfg, method)
    except Exception as exc:  # cell failure is recorded, not fatal to siblings
        return CellResult(method=method, seed=seed, results=[], checkpoints=[], error=str(exc))
    provenance = {
        "config_sha256": cfg_hash,
        "seed": seed,
        "artifact_version": __version__,
    }
    paths = []
    for task_result, state in zip(results, states):
        path = ckpt_dir / f"{_safe_method_name(method)}_seed{seed}_task{task_result.task_index}.json"
        save_checkpoint(state, path, provenance, method)
        paths.append(str(path))
    return CellResult(method=method, seed=seed, results=results, checkpoints=paths)


def _float_field(value: float) -> str:
    return repr(float(value))


def render_metrics_csv(cells: list[CellResult], cfg_hash: str, seeds) -> tuple[str, list[dict], list[dict]]:
    buf = io.StringIO()
    buf.write(_provenance_line(cfg_hash, seeds) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    rows: list[dict] = []
    failures: list[dict] = []
    for cell in cells:
        if cell.error is not None:
            # failure marker row: metrics nan, skipped_instances -1
            writer.writerow([cell.method, cell.seed, -1, 0, "nan", "nan", "nan", "nan", -1])
            failures.append({"method": cell.method, "seed": cell.seed, "error": cell.error})
            continue
        for r in cell.results:
            m = r.metrics
            writer.writerow(
                [
                    cell.method,
                    cell.seed,
                    r.task_index,
                    r.labels_learned,
                    _float_field(m.dis1),
                    _float_field(m.dis2),
                    _float_field(m.sim1),
                    _float_field(m.sim2),
                    m.skipped,
                ]
            )
            rows.append(
                {
                    "method": cell.method,
                    "seed": cell.seed,
                    "task_index": r.task_index,
                    "labels_learned": r.labels_learned,
                    "dis1": m.dis1,
                    "dis2": m.dis2,
                    "sim1": m.sim1,
                    "sim2": m.sim2,
                    "skipped_instances": m.skipped,
                }
            )
    return buf.getvalue(), rows, failures


def run_experiment(cfg: ExperimentConfig, dataset_path, out_dir, workers: int = 1) -> ExperimentResult:
    """Run every (method, seed) cell against a generated dataset.

    Cells execute independently (optionally in parallel); outputs are written
    in fixed method-major order regardless of completion order.
    """
    dataset_path = Path(dataset_path)
    if not dataset_path.exists():
        raise FileNotFoundError(f"dataset not found: {dataset_path}")
    if cfg.dataset_sha256 is not None:
        actual = hashlib.sha256(dataset_path.read_bytes()).hexdigest()
        if actual != cfg.dataset_sha256:
            raise ValueError(
                f"dataset hash mismatch: expected {cfg.dataset_sha256}, got {actual}"
            )
    stream = read_stream_jsonl(dataset_path)
    if stream.config != cfg.stream:
        raise ValueError("dataset was generated from a different stream config")

    out = Path(out_dir)
    ckpt_dir = out / "checkpoints"
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    cfg_hash = config_hash(cfg)

    cell_specs = [(m, s) for m in cfg.methods for s in cfg.seeds]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            cells = list(
                pool.map(
                    lambda ms: _run_cell(ms[0], ms[1], stream, cfg, ckpt_dir, cfg_hash),
                    cell_specs,
                )
            )
    else:
        cells = [_run_cell(m, s, stream, cfg, ckpt_dir, cfg_hash) for m, s in cell_specs]

    text, rows, failures = render_metrics_csv(cells, cfg_hash, cfg.seeds)
    csv_path = out / METRICS_FILENAME
    _atomic_write_text(csv_path, text)
    checkpoints = [p for c in cells for p in c.checkpoints]
    return ExperimentResult(
        metrics_csv=str(csv_path), rows=rows, checkpoints=checkpoints, failures=failures
    )


def evaluate_checkpoint(checkpoint_path, dataset_path, task_index: int) -> dict:
    """Metrics of a saved model on the test set restricted to the labels
    learned through `task_index`."""
    state, meta = load_checkpoint(checkpoint_path)
    stream = read_stream_jsonl(dataset_path)
    per_task = stream.config.total_labels // stream.config.tasks
    if not 1 <= task_index <= stream.config.tasks:
        raise ValueError(f"task index {task_index} outside 1..{stream.config.tasks}")
    learned = task_index * per_task
    if learned > len(state.labels):
        raise ValueError(
            f"checkpoint has learned {len(state.labels)} labels; "
            f"cannot restrict to task {task_index} ({learned} labels)"
        )
    record = evaluate(state, stream.cumulative_test(task_index), learned)
    return {
        "method": meta.get("method"),
        "task_index": task_index,
        "labels_learned": learned,
        "dis1": record.dis1,
        "dis2": record.dis2,
        "sim1": record.sim1,
        "sim2": record.sim2,
        "skipped_instances": record.skipped,
    }


def export_scm_csv(checkpoint_path, out_path=None) -> dict:
    """Heatmap-style (row_label, col_label, value) export of a checkpoint's
    correlation matrix; written to out_path when given, else returned inline."""
    state, meta = load_checkpoint(checkpoint_path)
    if not isinstance(state, ModelState) or state.scm is None:
        raise ValueError("checkpoint does not contain a correlation matrix")
    scm = state.scm
    prov = meta.get("provenance", {})
    header = (
        f"# ildl-lab v{__version__} "
        f"config_sha256={prov.get('config_sha256', 'unknown')} "
        f"seed={prov.get('seed', 'unknown')} "
        f"labels={len(scm.labels)} block_boundary={scm.block_boundary}"
    )
    buf = io.StringIO()
    buf.write(header + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["row_label", "col_label", "value"])
    for row_label, col_label, value in heatmap_rows(scm):
        writer.writerow([row_label, col_label, format(value, ".17g")])
    text = buf.getvalue()
    result = {
        "labels": len(scm.labels),
        "block_boundary": scm.block_boundary,
        "rows": len(scm.labels) ** 2,
        "scm_text": serialize_scm(scm),
    }
    if out_path is not None:
        path = Path(out_path)
        path.parent.mkdir(parents=True, exist_ok=True)
        _atomic_write_text(path, text)
        result["path"] = str(path)
        result["csv"] = None
    else:
        result["path"] = None
        result["csv"] = text
    return result
