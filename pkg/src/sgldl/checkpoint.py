"""Versioned JSON checkpoints for both model kinds.

Every matrix is stored with an explicit shape header; float values round-trip
bit-exactly through JSON, so a loaded model makes bit-identical predictions.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .distributions import LabelSpace
from .graph import GcnParams
from .extractor import ExtractorParams
from .scm import ScalableCorrelationMatrix
from .trainer import ModelState, NaiveState

CHECKPOINT_KIND = "ildl-model"
CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    """Unreadable or inconsistent checkpoint file."""


def _enc(a: np.ndarray) -> dict:
    return {"shape": list(a.shape), "data": np.asarray(a, dtype=np.float64).ravel().tolist()}


def _dec(obj, what: str) -> np.ndarray:
    if not isinstance(obj, dict) or "shape" not in obj or "data" not in obj:
        raise CheckpointError(f"{what}: expected a shape/data matrix object")
    arr = np.array(obj["data"], dtype=np.float64)
    expected = int(np.prod(obj["shape"])) if obj["shape"] else 1
    if arr.size != expected:
        raise CheckpointError(
            f"{what}: shape {obj['shape']} does not match {arr.size} values"
        )
    return arr.reshape(obj["shape"])


def _state_doc(state: ModelState) -> dict:
    return {
        "architecture": "graph",
        "task_index": state.task_index,
        "labels": list(state.labels.ids),
        "input_dim": state.input_dim,
        "node_dim": state.node_dim,
        "graph_hidden": state.graph_hidden,
        "model_dim": state.model_dim,
        "seed": state.seed,
        "scm_threshold": state.scm_threshold,
        "extractor": {
            "w1": _enc(state.extractor.w1),
            "b1": _enc(state.extractor.b1),
            "w2": _enc(state.extractor.w2),
            "b2": _enc(state.extractor.b2),
            "w3": _enc(state.extractor.w3),
            "b3": _enc(state.extractor.b3),
        },
        "gcn": {"w1": _enc(state.gcn.w1), "w2": _enc(state.gcn.w2)},
        "h0": _enc(state.h0),
        "scm": None
        if state.scm is None
        else {
            "labels": list(state.scm.labels.ids),
            "block_boundary": state.scm.block_boundary,
            "entries": _enc(state.scm.entries),
        },
        "stored_g": None if state.stored_g is None else _enc(state.stored_g),
        "snapshot": None if state.snapshot is None else _state_doc(state.snapshot),
    }


def _naive_doc(state: NaiveState) -> dict:
    return {
        "architecture": "dense-head",
        "task_index": state.task_index,
        "labels": list(state.labels.ids),
        "input_dim": state.input_dim,
        "model_dim": state.model_dim,
        "seed": state.seed,
        "extractor": {
            "w1": _enc(state.extractor.w1),
            "b1": _enc(state.extractor.b1),
            "w2": _enc(state.extractor.w2),
            "b2": _enc(state.extractor.b2),
            "w3": _enc(state.extractor.w3),
            "b3": _enc(state.extractor.b3),
        },
        "head": _enc(state.head),
    }


def _state_from_doc(doc: dict) -> ModelState:
    ext = doc["extractor"]
    scm_doc = doc.get("scm")
    return ModelState(
        task_index=doc["task_index"],
        labels=LabelSpace(tuple(doc["labels"])),
        extractor=ExtractorParams(
            w1=_dec(ext["w1"], "extractor.w1"),
            b1=_dec(ext["b1"], "extractor.b1"),
            w2=_dec(ext["w2"], "extractor.w2"),
            b2=_dec(ext["b2"], "extractor.b2"),
            w3=_dec(ext["w3"], "extractor.w3"),
            b3=_dec(ext["b3"], "extractor.b3"),
        ),
        gcn=GcnParams(w1=_dec(doc["gcn"]["w1"], "gcn.w1"), w2=_dec(doc["gcn"]["w2"], "gcn.w2")),
        h0=_dec(doc["h0"], "h0"),
        scm=None
        if scm_doc is None
        else ScalableCorrelationMatrix(
            LabelSpace(tuple(scm_doc["labels"])),
            _dec(scm_doc["entries"], "scm.entries"),
            scm_doc["block_boundary"],
        ),
        stored_g=None if doc.get("stored_g") is None else _dec(doc["stored_g"], "stored_g"),
        snapshot=None if doc.get("snapshot") is None else _state_from_doc(doc["snapshot"]),
        input_dim=doc["input_dim"],
        node_dim=doc["node_dim"],
        graph_hidden=doc["graph_hidden"],
        model_dim=doc["model_dim"],
        seed=doc["seed"],
        scm_threshold=doc.get("scm_threshold"),
    )


def _naive_from_doc(doc: dict) -> NaiveState:
    ext = doc["extractor"]
    return NaiveState(
        task_index=doc["task_index"],
        labels=LabelSpace(tuple(doc["labels"])),
        extractor=ExtractorParams(
            w1=_dec(ext["w1"], "extractor.w1"),
            b1=_dec(ext["b1"], "extractor.b1"),
            w2=_dec(ext["w2"], "extractor.w2"),
            b2=_dec(ext["b2"], "extractor.b2"),
            w3=_dec(ext["w3"], "extractor.w3"),
            b3=_dec(ext["b3"], "extractor.b3"),
        ),
        head=_dec(doc["head"], "head"),
        input_dim=doc["input_dim"],
        model_dim=doc["model_dim"],
        seed=doc["seed"],
    )


def save_checkpoint(state, path, provenance: dict, method: str) -> None:
    """Atomically write a checkpoint (temp file, then rename)."""
    doc = {
        "kind": CHECKPOINT_KIND,
        "version": CHECKPOINT_VERSION,
        "provenance": provenance,
        "method": method,
    }
    if isinstance(state, NaiveState):
        doc.update(_naive_doc(state))
    elif isinstance(state, ModelState):
        doc.update(_state_doc(state))
    else:
        raise TypeError(f"cannot checkpoint {type(state).__name__}")
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(doc, separators=(",", ":")))
    tmp.replace(path)


def load_checkpoint(path):
    """Returns (state, meta) where meta holds method and provenance."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(doc, dict) or doc.get("kind") != CHECKPOINT_KIND:
        raise CheckpointError(f"{path}: not a model checkpoint")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"{path}: unsupported checkpoint version {doc.get('version')!r}"
        )
    meta = {"method": doc.get("method"), "provenance": doc.get("provenance", {})}
    try:
        arch = doc["architecture"]
        if arch == "graph":
            return _state_from_doc(doc), meta
        if arch == "dense-head":
            return _naive_from_doc(doc), meta
    except KeyError as exc:
        raise CheckpointError(f"{path}: missing field {exc}") from None
    raise CheckpointError(f"{path}: unknown architecture {doc.get('architecture')!r}")
