"""FastAPI service exposing the benchmark engine.

The CLI is a thin client of this service; it can run the app in-process or
point at a deployed instance. Runs are pure compute and hold no server
state, so concurrent requests are safe.
"""
from __future__ import annotations

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..core import CapabilityError, InputError, LambdaSchedule, fd_gradient_check
from ..experiments import (
    ExperimentSpec,
    qn_suite,
    run_experiment,
    table1_suite,
    trace_rows,
)
from ..functions import lookup, registry, sample_x0
from ..optimizers import OptimizerConfig
from .models import (
    CheckRequest,
    CheckResponse,
    FunctionInfo,
    RunRequest,
    RunResponse,
    SeedsRequest,
    TracePayload,
)


def _build_spec(req: RunRequest) -> ExperimentSpec:
    if req.lambda_end is None:
        sched = LambdaSchedule.constant(req.lambda_start)
    else:
        sched = LambdaSchedule.linear(req.lambda_start, req.lambda_end, req.iters)
    configs = {
        m: OptimizerConfig(
            method=m,
            alpha=req.alpha,
            lam=sched,
            iters=req.iters,
            threshold=req.threshold,
            fd_step=req.fd_step,
            grad_tol=req.grad_tol,
        )
        for m in req.optimizers
    }
    return ExperimentSpec(
        function=req.function,
        configs=configs,
        seeds=tuple(req.seeds),
        x0_override=tuple(req.x0) if req.x0 is not None else None,
    )


def _hessian_fd_error(obj, x, h: float) -> float:
    hess = obj.hessian(x)
    n = obj.dim
    fd = np.empty((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        fd[:, i] = (obj.gradient(x + e) - obj.gradient(x - e)) / (2.0 * h)
    fd = 0.5 * (fd + fd.T)
    scale = np.maximum(1.0, np.abs(hess))
    return float(np.max(np.abs(hess - fd) / scale))


def run_check(req: CheckRequest) -> CheckResponse:
    fn = lookup(req.function)
    obj = fn.objective
    grad_err = 0.0
    for i in range(req.points):
        x = sample_x0(fn, req.seed_base + i)
        grad_err = max(grad_err, fd_gradient_check(obj, x, req.step))
    hess_err = None
    hess_ok = None
    if obj.has_hessian:
        hess_err = 0.0
        for i in range(min(req.points, 10)):
            x = sample_x0(fn, req.seed_base + i)
            hess_err = max(hess_err, _hessian_fd_error(obj, x, max(req.step, 1e-6)))
        hess_ok = hess_err <= 1e-4
    min_grad = None
    if fn.minimum_interior:
        min_grad = float(np.linalg.norm(obj.gradient(fn.x_star)))
    gradient_ok = grad_err <= req.tolerance
    return CheckResponse(
        function=fn.name,
        points=req.points,
        step=req.step,
        tolerance=req.tolerance,
        max_gradient_error=grad_err,
        gradient_ok=gradient_ok,
        max_hessian_error=hess_err,
        hessian_ok=hess_ok,
        minimum_grad_norm=min_grad,
        passed=gradient_ok and hess_ok is not False,
    )


def create_app() -> FastAPI:
    app = FastAPI(title="cgdopt benchmark service", version=__version__)

    @app.exception_handler(InputError)
    async def _input_error(request: Request, exc: InputError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.exception_handler(CapabilityError)
    async def _capability_error(request: Request, exc: CapabilityError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.get("/functions", response_model=list[FunctionInfo])
    def functions():
        out = []
        for fn in registry():
            t = fn.table1
            out.append(
                FunctionInfo(
                    name=fn.name,
                    aliases=list(fn.aliases),
                    dim=fn.dim,
                    f_star=fn.f_star,
                    x_star=[float(v) for v in fn.x_star],
                    domain_box=[[float(lo), float(hi)] for lo, hi in fn.objective.domain_box],
                    has_hessian=fn.objective.has_hessian,
                    minimum_interior=fn.minimum_interior,
                    table1=None
                    if t is None
                    else {
                        "lambda_start": t.lambda_start,
                        "lambda_end": t.lambda_end,
                        "alpha": t.alpha,
                    },
                )
            )
        return out

    @app.post("/run", response_model=RunResponse)
    def run_endpoint(req: RunRequest):
        result = run_experiment(_build_spec(req))
        f_star = result.function.f_star
        traces = [
            TracePayload(
                optimizer=o.optimizer,
                seed=o.seed,
                terminated_by=o.trace.terminated_by,
                total_grad_evals=o.trace.grad_evals,
                final_f=o.trace.final_f,
                final_x=[float(v) for v in o.trace.final_x],
                rows=trace_rows(o.trace, f_star),
            )
            for o in result.outcomes
        ]
        return RunResponse(summary=result.summary, traces=traces)

    @app.post("/table1")
    def table1_endpoint(req: SeedsRequest):
        return table1_suite(req.seeds)

    @app.post("/qn-suite")
    def qn_endpoint(req: SeedsRequest):
        return qn_suite(req.seeds)

    @app.post("/check", response_model=CheckResponse)
    def check_endpoint(req: CheckRequest):
        return run_check(req)

    return app


app = create_app()
