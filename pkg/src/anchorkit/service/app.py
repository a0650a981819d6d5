"""FastAPI service wrapping the anchorkit runners.

Domain failures surface as HTTP 400 with a ``kind`` field ("config",
"numeric", "invariant") that clients map onto exit codes; request-shape
problems are FastAPI's usual 422.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__, runner
from ..errors import AnchorKitError
from .schemas import (
    HealthResponse,
    LimitCheckRequest,
    PgExtraRequest,
    RatesRequest,
    RunResponse,
    SimulateRequest,
    SolveRequest,
    WorstcaseRequest,
)

app = FastAPI(title="anchorkit",
              description="Anchored fixed-point flows, solvers, and diagnostics",
              version=__version__)


@app.exception_handler(AnchorKitError)
async def _domain_error(request: Request, exc: AnchorKitError):
    return JSONResponse(status_code=400,
                        content={"error": str(exc), "kind": exc.category})


def _respond(result: runner.RunResult) -> RunResponse:
    return RunResponse(columns=result.columns, rows=result.rows,
                       summary=result.summary)


@app.get("/health", response_model=HealthResponse)
def health():
    return HealthResponse(status="ok", version=__version__)


@app.post("/simulate", response_model=RunResponse)
def simulate(req: SimulateRequest):
    return _respond(runner.run_simulate(
        operator=req.operator.as_spec(), schedule=req.schedule.as_spec(),
        x0=req.x0, t_max=req.t_max, steps=req.steps,
        yosida_lambda=req.yosida_lambda, x_star=req.x_star, window=req.window))


@app.post("/solve", response_model=RunResponse)
def solve(req: SolveRequest):
    return _respond(runner.run_solve(
        method=req.method, operator=req.operator.as_spec(), x0=req.x0,
        iters=req.iters, h=req.h, record_every=req.record_every,
        gamma=req.gamma, p=req.p, mu=req.mu, x_star=req.x_star,
        window=req.window, include_coords=req.include_coords))


@app.post("/rates", response_model=RunResponse)
def rates(req: RatesRequest):
    return _respond(runner.run_rates(
        window=req.window, method=req.method, operator=req.operator.as_spec(),
        x0=req.x0, iters=req.iters, h=req.h, record_every=req.record_every,
        gamma=req.gamma, p=req.p, mu=req.mu, x_star=req.x_star,
        include_coords=req.include_coords))


@app.post("/worstcase", response_model=RunResponse)
def worstcase(req: WorstcaseRequest):
    return _respond(runner.run_worstcase(
        gamma=req.gamma, p=req.p, r_kind=req.r_kind, scale=req.scale,
        x0=req.x0, t_min=req.t_min, t_max=req.t_max, n_points=req.n_points,
        spacing=req.spacing, floor=req.floor, quad_nodes=req.quad_nodes))


@app.post("/pgextra", response_model=RunResponse)
def pgextra(req: PgExtraRequest):
    anchor = req.anchor.as_spec() if req.anchor is not None else None
    return _respond(runner.run_pgextra(
        seed=req.seed, preset=req.preset, d=req.d, n_agents=req.n_agents,
        m_i=req.m_i, noise_sigma=req.noise_sigma, sparsity=req.sparsity,
        reg_weight=req.reg_weight, step=req.step, topology=req.topology,
        er_prob=req.er_prob, graph_seed=req.graph_seed, anchor=anchor,
        iters=req.iters))


@app.post("/limitcheck", response_model=RunResponse)
def limitcheck(req: LimitCheckRequest):
    return _respond(runner.run_limitcheck(
        operator=req.operator.as_spec(), x0=req.x0, t_horizon=req.t_horizon,
        h_list=req.h_list, yosida_lambda=req.yosida_lambda))
