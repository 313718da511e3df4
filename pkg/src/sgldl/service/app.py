"""Lab service: dataset generation, training cells, evaluation, and matrix
export over HTTP. The CLI drives these endpoints either in-process or against
a remote instance; all heavy lifting lives in the core package.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..checkpoint import CheckpointError
from .. import runner
from .schemas import (
    EvalRequest,
    EvalResponse,
    ExportScmRequest,
    ExportScmResponse,
    GenRequest,
    GenResponse,
    HealthResponse,
    TrainRequest,
    TrainResponse,
)


def create_app() -> FastAPI:
    app = FastAPI(title="ildl-lab", version=__version__)

    @app.get("/api/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/api/gen", response_model=GenResponse)
    def gen(req: GenRequest) -> GenResponse:
        try:
            path, sha, records = runner.generate_dataset(req.config, req.out or req.config.out_dir)
        except (ValueError, OSError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        return GenResponse(dataset=path, sha256=sha, instances=records)

    @app.post("/api/train", response_model=TrainResponse)
    def train(req: TrainRequest) -> TrainResponse:
        try:
            result = runner.run_experiment(
                req.config, req.dataset, req.out or req.config.out_dir, req.workers
            )
        except FileNotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from None
        except (ValueError, OSError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        return TrainResponse(
            metrics_csv=result.metrics_csv,
            checkpoints=result.checkpoints,
            rows=result.rows,
            failures=result.failures,
        )

    @app.post("/api/eval", response_model=EvalResponse)
    def eval_checkpoint(req: EvalRequest) -> EvalResponse:
        try:
            record = runner.evaluate_checkpoint(req.checkpoint, req.dataset, req.task)
        except FileNotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from None
        except (CheckpointError, ValueError, OSError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        return EvalResponse(**record)

    @app.post("/api/export-scm", response_model=ExportScmResponse)
    def export_scm(req: ExportScmRequest) -> ExportScmResponse:
        try:
            result = runner.export_scm_csv(req.checkpoint, req.out)
        except FileNotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from None
        except (CheckpointError, ValueError, OSError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        return ExportScmResponse(**result)

    return app


app = create_app()
