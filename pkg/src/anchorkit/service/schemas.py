"""Request/response models for the anchorkit service."""

from __future__ import annotations

from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, Field


class OperatorModel(BaseModel):
    kind: Literal["rotation2d", "rotation", "scaled_identity", "identity",
                  "affine", "l1", "zero"]
    scale: float = 1.0
    mu: float = 1.0
    dim: int = 2
    weight: float = 1.0
    matrix: Optional[List[List[float]]] = None
    shift: Optional[List[float]] = None

    def as_spec(self) -> dict:
        return self.model_dump(exclude_none=True)


class ScheduleModel(BaseModel):
    family: Literal["power_law", "powerlaw", "strongly_monotone",
                    "adaptive", "none"] = "power_law"
    gamma: float = 1.0
    p: float = 1.0
    mu: float = 1.0
    clamp_delta: float = 1e-3

    def as_spec(self) -> dict:
        return self.model_dump()


class SimulateRequest(BaseModel):
    operator: OperatorModel
    schedule: ScheduleModel = ScheduleModel()
    x0: Optional[List[float]] = None
    t_max: float = Field(default=100.0, gt=0)
    steps: int = Field(default=10_000, ge=10)
    yosida_lambda: Optional[float] = Field(default=None, gt=0)
    x_star: Optional[List[float]] = None
    window: Optional[Tuple[float, float]] = None


class SolveRequest(BaseModel):
    method: Literal["appm", "generalized", "osppm", "adaptive", "halpern"]
    operator: OperatorModel
    x0: Optional[List[float]] = None
    iters: int = Field(default=1000, ge=1)
    h: float = Field(default=1.0, gt=0)
    record_every: int = Field(default=1, ge=1)
    gamma: float = Field(default=1.0, gt=0)
    p: float = Field(default=1.0, gt=0)
    mu: float = Field(default=0.0, ge=0)
    x_star: Optional[List[float]] = None
    window: Optional[Tuple[float, float]] = None
    include_coords: bool = False


class RatesRequest(SolveRequest):
    window: Tuple[float, float]


class WorstcaseRequest(BaseModel):
    gamma: float = Field(gt=0)
    p: float = Field(gt=0)
    r_kind: Literal["t2", "t2gamma", "t2p"]
    scale: float = 1.0
    x0: Optional[List[float]] = None
    t_min: float = Field(default=1.0, gt=0)
    t_max: float = Field(default=100.0, gt=0)
    n_points: int = Field(default=200, ge=2)
    spacing: Literal["linear", "log"] = "linear"
    floor: Optional[float] = None
    quad_nodes: int = Field(default=128, ge=64)


class PgExtraRequest(BaseModel):
    seed: int = 7
    preset: Optional[Literal["desk", "paper"]] = "desk"
    d: Optional[int] = Field(default=None, ge=1)
    n_agents: Optional[int] = Field(default=None, ge=1)
    m_i: Optional[int] = Field(default=None, ge=1)
    noise_sigma: float = Field(default=0.01, ge=0)
    sparsity: float = Field(default=0.2, ge=0, le=1)
    reg_weight: Optional[float] = Field(default=None, ge=0)
    step: Optional[float] = Field(default=None, gt=0)
    topology: Literal["ring", "path", "erdos_renyi", "explicit"] = "ring"
    er_prob: float = Field(default=0.5, gt=0, le=1)
    graph_seed: int = 1
    anchor: Optional[ScheduleModel] = None
    iters: int = Field(default=2000, ge=1)


class LimitCheckRequest(BaseModel):
    operator: OperatorModel
    x0: Optional[List[float]] = None
    t_horizon: float = Field(default=10.0, gt=0)
    h_list: List[float] = [0.1, 0.05, 0.025, 0.0125]
    yosida_lambda: Optional[float] = Field(default=None, gt=0)


class RunResponse(BaseModel):
    columns: List[str]
    rows: List[List[float]]
    summary: dict


class HealthResponse(BaseModel):
    status: str
    version: str
