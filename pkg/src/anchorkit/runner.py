"""Command implementations shared by the HTTP service and (through it) the CLI.

Each run function returns a ``RunResult`` with the CSV table of the run, a
summary record (method, schedule, slope, r_squared, bounds_ok as a list of
named booleans), and the series to plot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import diagnostics as diag
from . import distributed as dist
from . import dynamics as dyn
from . import operators as ops
from . import schedules as sched
from . import solvers as solv
from .errors import ConfigError

DESK_PRESET = dict(d=20, n_agents=6, m_i=4, reg_weight=0.01, step=0.01)
PAPER_PRESET = dict(d=100, n_agents=20, m_i=4, reg_weight=0.01, step=0.01)


@dataclass
class RunResult:
    columns: list
    rows: list
    summary: dict
    plot_series: list = field(default_factory=list)  # (name, xs, ys) triples


def build_operator(spec: dict) -> ops.OperatorSpec:
    kind = spec.get("kind")
    if kind in ("rotation2d", "rotation"):
        return ops.rotation2d(scale=float(spec.get("scale", 1.0)))
    if kind in ("scaled_identity", "identity"):
        return ops.scaled_identity(float(spec.get("mu", 1.0)),
                                   dim=int(spec.get("dim", 2)))
    if kind == "affine":
        if "matrix" not in spec:
            raise ConfigError("affine operator needs a matrix")
        return ops.affine(spec["matrix"], spec.get("shift"))
    if kind == "l1":
        return ops.l1_subdifferential(float(spec.get("weight", 1.0)),
                                      dim=int(spec.get("dim", 2)))
    if kind == "zero":
        return ops.zero_operator(dim=int(spec.get("dim", 2)))
    raise ConfigError(f"unknown operator kind {kind!r}")


def build_schedule(spec: Optional[dict]) -> sched.AnchorSchedule:
    if spec is None:
        return sched.no_anchor()
    family = spec.get("family", sched.POWER_LAW)
    clamp = float(spec.get("clamp_delta", 1e-3))
    if family in (sched.POWER_LAW, "powerlaw"):
        return sched.power_law(float(spec.get("gamma", 1.0)),
                               float(spec.get("p", 1.0)), clamp_delta=clamp)
    if family == sched.STRONGLY_MONOTONE:
        return sched.strongly_monotone(float(spec.get("mu", 1.0)), clamp_delta=clamp)
    if family == sched.ADAPTIVE:
        return sched.adaptive(clamp_delta=clamp)
    if family == sched.NONE:
        return sched.no_anchor()
    raise ConfigError(f"unknown schedule family {family!r}")


def describe_schedule(schedule: sched.AnchorSchedule) -> str:
    if schedule.family == sched.POWER_LAW:
        return f"power_law(gamma={schedule.gamma}, p={schedule.p})"
    if schedule.family == sched.STRONGLY_MONOTONE:
        return f"strongly_monotone(mu={schedule.mu})"
    return schedule.family


def _default_x0(op: ops.OperatorSpec, x0) -> np.ndarray:
    if x0 is None:
        base = np.zeros(op.dim)
        base[0] = 1.0
        return base
    arr = np.asarray(x0, dtype=float)
    if arr.shape != (op.dim,):
        raise ConfigError(f"x0 has dim {arr.shape}, operator needs ({op.dim},)")
    return arr


def _try_fit(source, window):
    try:
        fit = diag.fit_rate(source, window)
        return fit.slope, fit.r_squared
    except ConfigError:
        return None, None


def run_simulate(operator: dict, schedule: dict, x0=None, t_max: float = 100.0,
                 steps: int = 10_000, yosida_lambda: Optional[float] = None,
                 x_star=None, window: Optional[tuple] = None) -> RunResult:
    op = build_operator(operator)
    anchor = build_schedule(schedule)
    start = _default_x0(op, x0)
    if anchor.family == sched.ADAPTIVE:
        traj = dyn.integrate_adaptive_ode(op, start, t_max, steps)
    else:
        traj = dyn.integrate_anchor_ode(op, anchor, start, t_max, steps,
                                        yosida_lambda=yosida_lambda)
    rs = traj.residual_sq()
    columns = (["t"] + [f"x_{i}" for i in range(traj.dim)] + ["resid_sq", "beta"])
    rows = [[t, *state, r, b] for t, state, r, b
            in zip(traj.times, traj.states, rs, traj.betas)]

    slope, r_sq = _try_fit(traj, window)
    bounds = []
    if x_star is not None:
        star = np.asarray(x_star, dtype=float)
        dists = np.linalg.norm(traj.states - star, axis=1)
        bounds.append(["trajectory_bounded",
                       bool(np.all(dists <= dists[0] * (1 + 1e-6) + 1e-12))])
        if anchor.family == sched.STRONGLY_MONOTONE:
            bounds.append(["strong_residual_bound",
                           diag.check_residual_bound_strong(traj, anchor.mu, star)])
            v_vals = [diag.lyapunov_strong(s, r, t, start, anchor.mu)
                      for s, r, t in zip(traj.states, traj.residuals, traj.times)]
            bounds.append(["strong_lyapunov_nonpositive",
                           bool(max(v_vals) <= 1e-6)])
        elif (anchor.family == sched.POWER_LAW
              and abs(anchor.gamma - 1.0) < 1e-12 and abs(anchor.p - 1.0) < 1e-12):
            report = diag.check_residual_bound_monotone(traj, anchor, star)
            bounds.append(["monotone_residual_bound", bool(report.ok)])
    if anchor.family == sched.ADAPTIVE:
        late = traj.times > 0.1
        bounds.append(["adaptive_beta_le_inv_t",
                       bool(np.all(traj.betas[late]
                                   <= (1.0 / traj.times[late]) * (1 + 1e-3)))])

    summary = {"method": "simulate", "operator": op.kind,
               "schedule": describe_schedule(anchor),
               "slope": slope, "r_squared": r_sq,
               "bounds_ok": bounds,
               "t_max": t_max, "steps": steps}
    plot = [("resid_sq", list(traj.times), list(rs))]
    return RunResult(columns=columns, rows=rows, summary=summary, plot_series=plot)


_METHODS = ("appm", "generalized", "osppm", "adaptive", "halpern")


def run_solve(method: str, operator: dict, x0=None, iters: int = 1000,
              h: float = 1.0, record_every: int = 1, gamma: float = 1.0,
              p: float = 1.0, mu: float = 0.0, x_star=None,
              window: Optional[tuple] = None,
              include_coords: bool = False) -> RunResult:
    if method not in _METHODS:
        raise ConfigError(f"method must be one of {_METHODS}, got {method!r}")
    op = build_operator(operator)
    start = _default_x0(op, x0)
    cfg = solv.SolverConfig(max_iter=iters, h=h, record_every=record_every)
    if method == "appm":
        log = solv.run_appm(op, start, cfg)
        schedule_desc = "power_law(gamma=1, p=1)"
    elif method == "generalized":
        log = solv.run_generalized_anchor(op, gamma, p, start, cfg)
        schedule_desc = f"power_law(gamma={gamma}, p={p})"
    elif method == "osppm":
        log = solv.run_osppm(op, mu, start, cfg)
        schedule_desc = f"osppm(mu={mu})"
    elif method == "adaptive":
        log = solv.run_adaptive(op, start, cfg)
        schedule_desc = "adaptive"
    else:
        weights = [1.0 / (k + 2.0) for k in range(iters)]
        log = solv.run_halpern(op, weights, start, cfg)
        schedule_desc = "halpern(beta_k=1/(k+2))"

    rs = log.residual_sq()
    columns = ["k", "resid_sq", "beta"]
    if include_coords:
        columns += [f"x_{i}" for i in range(log.dim)]
        rows = [[float(k), r, b, *x]
                for k, r, b, x in zip(log.ks, rs, log.betas, log.xs)]
    else:
        rows = [[float(k), r, b] for k, r, b in zip(log.ks, rs, log.betas)]

    slope, r_sq = _try_fit(log, window)
    bounds = []
    if x_star is not None:
        star = np.asarray(x_star, dtype=float)
        dists = np.linalg.norm(log.xs - star, axis=1)
        d0 = float(np.linalg.norm(start - star))
        bounds.append(["iterates_bounded",
                       bool(np.all(dists <= d0 * (1 + 1e-10) + 1e-14))])
    if method == "adaptive":
        bounds.append(["beta_first_is_half",
                       bool(log.ks[0] != 1 or abs(log.betas[0] - 0.5) < 1e-12)])
        bounds.append(["beta_le_inv_kp1",
                       bool(np.all(log.betas <= 1.0 / (log.ks + 1.0) + 1e-12))])

    summary = {"method": method, "operator": op.kind, "schedule": schedule_desc,
               "slope": slope, "r_squared": r_sq, "bounds_ok": bounds,
               "iters": iters, "h": h}
    plot = [("resid_sq", [float(k) for k in log.ks], list(rs))]
    return RunResult(columns=columns, rows=rows, summary=summary, plot_series=plot)


def run_rates(window: tuple, **solve_kwargs) -> RunResult:
    if window is None:
        raise ConfigError("rates needs an explicit fit window")
    result = run_solve(window=tuple(window), **solve_kwargs)
    result.summary["method"] = "rates"
    result.summary["window"] = list(window)
    return result


def run_worstcase(gamma: float, p: float, r_kind: str, scale: float = 1.0,
                  x0=None, t_min: float = 1.0, t_max: float = 100.0,
                  n_points: int = 200, spacing: str = "linear",
                  floor: Optional[float] = None,
                  quad_nodes: int = 128) -> RunResult:
    op = ops.rotation2d(scale=scale)
    schedule = sched.power_law(gamma, p)
    start = _default_x0(op, x0)
    if spacing == "log":
        grid = np.logspace(math.log10(t_min), math.log10(t_max), n_points)
    elif spacing == "linear":
        grid = np.linspace(t_min, t_max, n_points)
    else:
        raise ConfigError(f"spacing must be 'linear' or 'log', got {spacing!r}")

    if r_kind == "t2":
        powers = grid ** 2
    elif r_kind == "t2gamma":
        powers = grid ** (2.0 * gamma)
    elif r_kind == "t2p":
        powers = grid ** (2.0 * p)
    else:
        raise ConfigError(f"r_kind must be one of {diag.R_KINDS}, got {r_kind!r}")

    rows = []
    scaled = []
    for t, r_t in zip(grid, powers):
        x_t = dyn.integral_solution_linear(op.matrix, schedule, start, float(t),
                                           quad_nodes=quad_nodes)
        resid_sq = float(np.sum((op.matrix @ x_t) ** 2))
        rows.append([float(t), resid_sq, r_t * resid_sq])
        scaled.append(r_t * resid_sq)
    scaled = np.array(scaled)
    tail = grid >= grid.max() / 10.0
    estimate = float(scaled[tail].max())

    bounds = []
    if floor is not None:
        bounds.append(["above_floor", bool(estimate >= floor)])
    summary = {"method": "worstcase", "operator": "rotation2d",
               "schedule": describe_schedule(schedule), "r_kind": r_kind,
               "slope": None, "r_squared": None,
               "limsup_estimate": estimate, "floor": floor, "bounds_ok": bounds}
    plot = [("scaled_resid_sq", list(grid), list(scaled))]
    return RunResult(columns=["t", "resid_sq", "scaled_resid_sq"],
                     rows=rows, summary=summary, plot_series=plot)


def run_pgextra(seed: int = 7, preset: Optional[str] = "desk",
                d: Optional[int] = None, n_agents: Optional[int] = None,
                m_i: Optional[int] = None, noise_sigma: float = 0.01,
                sparsity: float = 0.2, reg_weight: Optional[float] = None,
                step: Optional[float] = None, topology: str = "ring",
                er_prob: float = 0.5, graph_seed: int = 1,
                anchor: Optional[dict] = None, iters: int = 2000) -> RunResult:
    params = dict(DESK_PRESET)
    if preset == "paper":
        params = dict(PAPER_PRESET)
    elif preset not in (None, "desk"):
        raise ConfigError(f"preset must be 'desk' or 'paper', got {preset!r}")
    for key, val in (("d", d), ("n_agents", n_agents), ("m_i", m_i),
                     ("reg_weight", reg_weight), ("step", step)):
        if val is not None:
            params[key] = val

    problem = dist.gen_problem(seed=seed, d=params["d"], n=params["n_agents"],
                               m_i=params["m_i"], noise_sigma=noise_sigma,
                               sparsity=sparsity, reg_weight=params["reg_weight"],
                               step=params["step"])
    graph = dist.make_network(topology, params["n_agents"], prob=er_prob,
                              seed=graph_seed)
    anchor_sched = build_schedule(anchor) if anchor else None
    run = dist.run_anchored_pgextra(problem, graph, anchor_sched, iters)

    columns = ["k", "resid_sq_euclid", "resid_sq_M", "beta"]
    rows = [[float(k), e, m, b] for k, e, m, b
            in zip(run.ks, run.resid_sq, run.resid_sq_metric, run.betas)]

    is_vanilla = anchor_sched is None or anchor_sched.family == sched.NONE
    bounds = []
    if is_vanilla:
        bounds.append(["metric_residual_nonincreasing",
                       bool(np.all(np.diff(run.resid_sq_metric) <= 1e-15))])
    if anchor_sched is not None and anchor_sched.family == sched.ADAPTIVE:
        bounds.append(["beta_le_inv_kp1",
                       bool(np.all(run.betas <= 1.0 / (run.ks + 1.0) + 1e-12))])
    summary = {"method": "pgextra",
               "schedule": describe_schedule(anchor_sched) if anchor_sched else "none",
               "slope": None, "r_squared": None, "bounds_ok": bounds,
               "seed": seed, "final_resid_sq": float(run.resid_sq[-1]),
               "final_resid_sq_M": float(run.resid_sq_metric[-1]),
               "consensus_gap": dist.consensus_gap(run.final_state),
               "d": params["d"], "n_agents": params["n_agents"], "iters": iters}
    plot = [("resid_sq", [float(k) for k in run.ks], list(run.resid_sq))]
    return RunResult(columns=columns, rows=rows, summary=summary, plot_series=plot)


def run_limitcheck(operator: dict, x0=None, t_horizon: float = 10.0,
                   h_list=(0.1, 0.05, 0.025, 0.0125),
                   yosida_lambda: Optional[float] = None) -> RunResult:
    op = build_operator(operator)
    start = _default_x0(op, x0)
    table = diag.continuous_limit_check(op, start, t_horizon, list(h_list),
                                        yosida_lambda=yosida_lambda)
    devs = table[:, 1]
    decreasing = bool(np.all(np.diff(devs) < 0)) if len(devs) > 1 else True
    all_zero = bool(np.all(devs == 0.0))
    rows = [[float(h), float(dev)] for h, dev in table]
    summary = {"method": "limitcheck", "operator": op.kind,
               "schedule": "power_law(gamma=1, p=1)",
               "slope": None, "r_squared": None,
               "bounds_ok": [["deviations_decreasing", decreasing or all_zero]],
               "t_horizon": t_horizon}
    plot = [("max_deviation", [float(h) for h, _ in table],
             [float(d) if d > 0 else math.nan for _, d in table])]
    return RunResult(columns=["h", "max_deviation"], rows=rows,
                     summary=summary, plot_series=plot)
