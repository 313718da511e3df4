"""Request/response models for the lab service."""

from __future__ import annotations

from pydantic import BaseModel, Field

from ..config import ExperimentConfig


class HealthResponse(BaseModel):
    status: str
    version: str


class GenRequest(BaseModel):
    config: ExperimentConfig
    out: str | None = None  # falls back to config.out_dir


class GenResponse(BaseModel):
    dataset: str
    sha256: str
    instances: int


class MetricRow(BaseModel):
    method: str
    seed: int
    task_index: int
    labels_learned: int
    dis1: float
    dis2: float
    sim1: float
    sim2: float
    skipped_instances: int


class CellFailure(BaseModel):
    method: str
    seed: int
    error: str


class TrainRequest(BaseModel):
    config: ExperimentConfig
    dataset: str
    out: str | None = None  # falls back to config.out_dir
    workers: int = Field(default=1, ge=1)


class TrainResponse(BaseModel):
    metrics_csv: str
    checkpoints: list[str]
    rows: list[MetricRow]
    failures: list[CellFailure]


class EvalRequest(BaseModel):
    checkpoint: str
    dataset: str
    task: int = Field(ge=1)


class EvalResponse(BaseModel):
    method: str | None
    task_index: int
    labels_learned: int
    dis1: float
    dis2: float
    sim1: float
    sim2: float
    skipped_instances: int


class ExportScmRequest(BaseModel):
    checkpoint: str
    out: str | None = None


class ExportScmResponse(BaseModel):
    labels: int
    block_boundary: int
    rows: int
    path: str | None
    csv: str | None
    scm_text: str
