"""Experiment configuration: a single validated JSON document.

Unknown keys are rejected so that a config hash fully captures a run; the
hash goes into every output file's provenance header.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, model_validator

METHODS = ("sgldl", "naive", "w/oLNC", "w/oLDT", "w/oLRP")


class StreamConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    total_labels: int = Field(default=20, ge=1)
    tasks: int = Field(default=5, ge=1)
    sigma: float = Field(default=3.0, gt=0.0)
    train_per_task: int = Field(default=2000, ge=1)
    test_per_task: int = Field(default=500, ge=1)
    feature_dim: int = Field(default=16, ge=2)
    noise: float = Field(default=0.1, ge=0.0)
    seed: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _check_divisibility(self):
        if self.total_labels % self.tasks != 0:
            raise ValueError(
                f"total_labels ({self.total_labels}) must be divisible by tasks ({self.tasks})"
            )
        return self


class TrainConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    learning_rate: float = Field(default=0.05, gt=0.0)
    epochs: int = Field(default=30, ge=0)
    batch_size: int = Field(default=32, ge=1)
    lambda_nc: float = Field(default=1.0, ge=0.0)
    lambda_dt: float = Field(default=3.0, ge=0.0)
    lambda_rp: float = Field(default=3.0, ge=0.0)
    seed: int = Field(default=0, ge=0)
    node_dim: int = Field(default=16, ge=1)
    graph_hidden: int = Field(default=32, ge=1)
    model_dim: int = Field(default=32, ge=1)
    scm_threshold: float | None = None
    clip_threshold: float | None = Field(default=None, gt=0.0)


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    stream: StreamConfig = StreamConfig()
    train: TrainConfig = TrainConfig()
    methods: list[str] = Field(default=["sgldl"], min_length=1)
    seeds: list[int] = Field(default=[1], min_length=1)
    out_dir: str = "out"
    dataset_sha256: str | None = None

    @model_validator(mode="after")
    def _check_methods(self):
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ValueError(f"unknown methods {unknown}; choose from {list(METHODS)}")
        if len(set(self.methods)) != len(self.methods):
            raise ValueError("duplicate methods")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("duplicate seeds")
        if any(s < 0 for s in self.seeds):
            raise ValueError("seeds must be non-negative")
        return self


def canonical_json(model: BaseModel) -> str:
    return json.dumps(model.model_dump(), sort_keys=True, separators=(",", ":"))


def config_hash(model: BaseModel) -> str:
    return hashlib.sha256(canonical_json(model).encode()).hexdigest()


def load_experiment_config(path) -> ExperimentConfig:
    text = Path(path).read_text()
    return ExperimentConfig.model_validate_json(text)
