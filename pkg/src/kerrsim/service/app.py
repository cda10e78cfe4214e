"""HTTP front end: submit experiment jobs, poll them, fetch artifacts.

Quick analytic queries run synchronously; experiment pipelines are queued on
a small worker pool because a sweep can run for minutes to hours. Jobs live
in process memory (this is a lab tool, not a durable queue).
"""

from __future__ import annotations

import math
import uuid
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import PlainTextResponse

from .. import __version__
from ..analytic import kitten_coefficients, recurrence_times
from ..params import ModelParams
from ..experiments import (
    ExperimentConfig,
    IncompatibleRuns,
    NumericalFailure,
    compare,
    export_raster,
    parse_number,
    run,
)
from . import schemas


class JobStore:
    """In-memory registry of submitted experiment jobs."""

    def __init__(self, workers: int = 2):
        self.executor = ThreadPoolExecutor(max_workers=workers)
        self.jobs: dict[str, dict] = {}

    def submit(self, cfg: ExperimentConfig, output_dir: str | None) -> str:
        job_id = uuid.uuid4().hex[:12]
        record = {"status": "queued", "run_id": cfg.run_id()}
        self.jobs[job_id] = record

        def work():
            record["status"] = "running"
            try:
                result = run(cfg, output_root=output_dir)
            except Exception as exc:  # surfaced through the status endpoint
                record["status"] = "failed"
                record["error"] = f"{type(exc).__name__}: {exc}"
            else:
                record.update(
                    status="done",
                    out_dir=str(result.out_dir),
                    artifacts=result.artifacts,
                    wall_time_s=result.wall_time_s,
                )

        self.executor.submit(work)
        return job_id


def create_app() -> FastAPI:
    app = FastAPI(title="kerrsim", version=__version__)
    store = JobStore()
    app.state.jobs = store

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/kitten", response_model=schemas.KittenResponse)
    def kitten(req: schemas.KittenRequest):
        try:
            state = kitten_coefficients(req.m, req.n, req.alpha0)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        f = np.array(state.f)
        weights = np.abs(f) ** 2
        return schemas.KittenResponse(
            m=req.m,
            n=req.n,
            alpha0=req.alpha0,
            formation_kt=state.formation_time,
            coefficients=[schemas.ComplexNumber(re=z.real, im=z.imag) for z in f],
            weights=weights.tolist(),
            nonzero_count=int(np.sum(weights > 1e-12)),
        )

    @app.post("/recurrences", response_model=schemas.RecurrenceResponse)
    def recurrences(req: schemas.RecurrenceRequest):
        params = ModelParams(kappa=req.kappa, gamma=0.0, alpha0=1.0)
        times = recurrence_times(req.n, params, req.t_max)
        return schemas.RecurrenceResponse(
            n=req.n,
            times=[
                schemas.RecurrenceEntry(t=rt.t, witnesses=list(rt.witnesses))
                for rt in times
            ],
        )

    @app.post("/experiments", response_model=schemas.JobStatus)
    def submit(req: schemas.SubmitRequest):
        if (req.config_ini is None) == (req.config is None):
            raise HTTPException(status_code=400,
                                detail="provide exactly one of config_ini, config")
        try:
            if req.config_ini is not None:
                cfg = ExperimentConfig.from_ini(req.config_ini)
            else:
                cfg = ExperimentConfig.from_dict(req.config)
        except (ValueError, TypeError) as exc:
            raise HTTPException(status_code=400, detail=f"invalid config: {exc}")
        job_id = store.submit(cfg, req.output_dir)
        rec = store.jobs[job_id]
        return schemas.JobStatus(job_id=job_id, status=rec["status"],
                                 run_id=rec.get("run_id"))

    @app.get("/experiments/{job_id}", response_model=schemas.JobStatus)
    def status(job_id: str):
        rec = store.jobs.get(job_id)
        if rec is None:
            raise HTTPException(status_code=404, detail="unknown job")
        return schemas.JobStatus(job_id=job_id, **rec)

    @app.get("/experiments/{job_id}/artifacts/{name}", response_class=PlainTextResponse)
    def artifact(job_id: str, name: str):
        rec = store.jobs.get(job_id)
        if rec is None:
            raise HTTPException(status_code=404, detail="unknown job")
        if rec.get("status") != "done":
            raise HTTPException(status_code=409, detail=f"job is {rec['status']}")
        if name != "run.json" and name not in (rec.get("artifacts") or []):
            raise HTTPException(status_code=404, detail="unknown artifact")
        path = Path(rec["out_dir"]) / name
        return PlainTextResponse(path.read_text())

    @app.post("/compare")
    def compare_runs(req: schemas.CompareRequest):
        try:
            return compare(req.run_a, req.run_b, tol=req.tol)
        except IncompatibleRuns as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        except FileNotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc))

    @app.post("/export-raster", response_model=schemas.RasterResponse)
    def raster(req: schemas.RasterRequest):
        try:
            step = parse_number(req.phi_step)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        dump = Path(req.dump_path)
        if not dump.exists():
            raise HTTPException(status_code=404, detail=f"no such dump: {dump}")
        out = Path(req.out_path) if req.out_path else dump.with_suffix(".raster.csv")
        try:
            export_raster(dump, out, phi_step=step)
        except NumericalFailure as exc:
            raise HTTPException(status_code=500, detail=str(exc))
        return schemas.RasterResponse(out_path=str(out))

    return app


app = create_app()
