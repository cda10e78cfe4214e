"""Request/response models of the simulation service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    version: str


class KittenRequest(BaseModel):
    m: int = Field(ge=1, description="numerator of the formation time 2*pi*M/N")
    n: int = Field(ge=1, description="number of superposed coherent states")
    alpha0: float = Field(default=1.0, ge=0.0)


class ComplexNumber(BaseModel):
    re: float
    im: float


class KittenResponse(BaseModel):
    m: int
    n: int
    alpha0: float
    formation_kt: float
    coefficients: list[ComplexNumber]
    weights: list[float]
    nonzero_count: int


class RecurrenceRequest(BaseModel):
    n: int = Field(ge=1, description="quadrature moment order")
    kappa: float = Field(default=1.0, gt=0.0)
    t_max: float = Field(gt=0.0)


class RecurrenceEntry(BaseModel):
    t: float
    witnesses: list[tuple[int, int]]


class RecurrenceResponse(BaseModel):
    n: int
    times: list[RecurrenceEntry]


class SubmitRequest(BaseModel):
    """An experiment submission: either raw INI text or a structured config."""

    config_ini: str | None = None
    config: dict | None = None
    output_dir: str | None = None


class JobStatus(BaseModel):
    job_id: str
    status: str
    run_id: str | None = None
    out_dir: str | None = None
    artifacts: list[str] | None = None
    wall_time_s: float | None = None
    error: str | None = None


class CompareRequest(BaseModel):
    run_a: str
    run_b: str
    tol: float = 1e-10


class RasterRequest(BaseModel):
    dump_path: str
    out_path: str | None = None
    phi_step: str = "pi/200"


class RasterResponse(BaseModel):
    out_path: str
