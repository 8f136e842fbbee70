"""Request/response schemas for the benchmark service."""
from __future__ import annotations

from pydantic import BaseModel, Field, field_validator

from ..optimizers import METHODS


class FunctionInfo(BaseModel):
    name: str
    aliases: list[str]
    dim: int
    f_star: float
    x_star: list[float]
    domain_box: list[list[float]]
    has_hessian: bool
    minimum_interior: bool
    table1: dict | None


class RunRequest(BaseModel):
    """One experiment: shared hyperparameters applied to every optimizer,
    paired seeds, optional fixed initial point."""

    function: str
    optimizers: list[str] = Field(min_length=1)
    alpha: float = Field(gt=0)
    lambda_start: float = Field(default=0.0, ge=0)
    lambda_end: float | None = Field(default=None, ge=0, description="linear ramp endpoint; omit for a constant penalty")
    iters: int = Field(default=40, ge=1)
    threshold: int | None = Field(default=None, ge=1)
    fd_step: float = Field(default=0.01, gt=0)
    grad_tol: float = Field(default=0.0, ge=0)
    seeds: list[int] = Field(default_factory=lambda: [0], min_length=1)
    x0: list[float] | None = None

    @field_validator("optimizers")
    @classmethod
    def _known_methods(cls, v: list[str]) -> list[str]:
        for m in v:
            if m not in METHODS:
                raise ValueError(f"unknown optimizer {m!r}; known: {', '.join(METHODS)}")
        if len(set(v)) != len(v):
            raise ValueError("duplicate optimizers in request")
        return v


class TraceRow(BaseModel):
    k: int
    grad_evals: int
    f_minus_fstar: float
    grad_norm: float
    direction: str
    lambda_k: float = Field(serialization_alias="lambda", validation_alias="lambda")


class TracePayload(BaseModel):
    optimizer: str
    seed: int
    terminated_by: str
    total_grad_evals: int
    final_f: float
    final_x: list[float]
    rows: list[TraceRow]


class RunResponse(BaseModel):
    summary: dict
    traces: list[TracePayload]


class SeedsRequest(BaseModel):
    seeds: list[int] = Field(min_length=1)


class CheckRequest(BaseModel):
    function: str
    points: int = Field(default=50, ge=1)
    step: float = Field(default=1e-6, gt=0)
    seed_base: int = 0
    tolerance: float = Field(default=1e-5, gt=0)


class CheckResponse(BaseModel):
    function: str
    points: int
    step: float
    tolerance: float
    max_gradient_error: float
    gradient_ok: bool
    max_hessian_error: float | None
    hessian_ok: bool | None
    minimum_grad_norm: float | None
    passed: bool
