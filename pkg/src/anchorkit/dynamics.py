"""Continuous-time anchored flows.

Closed-form solutions for linear operators (a gamma-function series for the
gamma/t coefficient and a contraction-weighted integral form for general
coefficient families), plus fixed-step RK4 integration for everything else,
including the state-adaptive coefficient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from . import operators as ops
from . import schedules as sched
from .errors import (
    ConfigError,
    DenominatorVanished,
    DimensionMismatch,
    NoConvergence,
    NonFiniteState,
    QuadratureUnstable,
)

# Below this time the adaptive coefficient is replaced by its forced 1/t limit.
ADAPTIVE_TIME_FLOOR = 1e-6

_SERIES_MAX_TERMS = 10_000
_NODES_PER_PANEL = 8


@dataclass(frozen=True)
class Trajectory:
    """A sampled flow: strictly increasing times, states, residual selections,
    and the anchor coefficient at each sample.  Immutable after construction."""

    times: np.ndarray
    states: np.ndarray
    residuals: np.ndarray
    betas: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.times)
        if not (len(self.states) == len(self.residuals) == len(self.betas) == n):
            raise ConfigError("trajectory arrays must share their leading length")
        if n > 1 and not np.all(np.diff(self.times) > 0):
            raise ConfigError("trajectory times must be strictly increasing")
        for arr in (self.times, self.states, self.residuals, self.betas):
            arr.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    def residual_sq(self) -> np.ndarray:
        return np.einsum("ij,ij->i", self.residuals, self.residuals)

    def state_at(self, t: float) -> np.ndarray:
        """State at the grid point nearest to t."""
        return self.states[int(np.argmin(np.abs(self.times - t)))]


def _effective_operator(op: ops.OperatorSpec,
                        yosida_lambda: Optional[float]) -> Callable[[np.ndarray], np.ndarray]:
    if yosida_lambda is not None:
        if not yosida_lambda > 0:
            raise ConfigError(f"Yosida parameter must be positive, got {yosida_lambda}")
        prox = ops.make_resolvent(op, yosida_lambda)
        return lambda x: (x - prox(x)) / yosida_lambda
    if op.lipschitz is None:
        raise ConfigError(
            f"operator kind {op.kind!r} is not Lipschitz; pass yosida_lambda to regularize")
    return lambda x: ops.evaluate(op, x)


def _rk4_step(rhs, t, x, dt):
    k1 = rhs(t, x)
    k2 = rhs(t + 0.5 * dt, x + 0.5 * dt * k1)
    k3 = rhs(t + 0.5 * dt, x + 0.5 * dt * k2)
    k4 = rhs(t + dt, x + dt * k3)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _rk4_span(rhs, t, x, dt, stiffness):
    """Advance one grid step, internally refined so the stage ratio
    beta * dt stays near 1.

    Clamped coefficients of fast-vanishing anchors (beta ~ delta^{-p}) can
    dwarf the grid step right after t = 0; since beta is nonincreasing, the
    left-endpoint ratio bounds every stage.  The recording grid is
    unchanged, so cross-run comparisons stay exact.
    """
    n_sub = max(1, min(100_000, math.ceil(stiffness)))
    sub = dt / n_sub
    for i in range(n_sub):
        x = _rk4_step(rhs, t + i * sub, x, sub)
    return x


def integrate_anchor_ode(op: ops.OperatorSpec, schedule: sched.AnchorSchedule,
                         x0, t_max: float, n_steps: int,
                         yosida_lambda: Optional[float] = None) -> Trajectory:
    """Fixed-step RK4 for dX/dt = -A(X) - beta(t) (X - x0).

    The coefficient singularity at t = 0 is handled by clamping beta below
    ``schedule.clamp_delta``; non-Lipschitz operators integrate their Yosida
    regularization instead.
    """
    if schedule.family == sched.ADAPTIVE:
        raise ConfigError("adaptive coefficients integrate via integrate_adaptive_ode")
    if n_steps < 10:
        raise ConfigError(f"need at least 10 steps, got {n_steps}")
    if not t_max > 0:
        raise ConfigError(f"t_max must be positive, got {t_max}")
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (op.dim,):
        raise DimensionMismatch(f"x0 shape {x0.shape} does not match operator dim {op.dim}")
    a_eff = _effective_operator(op, yosida_lambda)

    def rhs(t, x):
        return -a_eff(x) - sched.beta_clamped(schedule, t) * (x - x0)

    dt = t_max / n_steps
    times = dt * np.arange(n_steps + 1)
    states = np.empty((n_steps + 1, op.dim))
    residuals = np.empty_like(states)
    betas = np.empty(n_steps + 1)

    x = x0.copy()
    states[0] = x
    residuals[0] = a_eff(x)
    betas[0] = sched.beta_clamped(schedule, 0.0)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(n_steps):
            stiffness = sched.beta_clamped(schedule, times[k]) * dt
            x = _rk4_span(rhs, times[k], x, dt, stiffness)
            if not np.all(np.isfinite(x)):
                prefix = Trajectory(times[:k + 1].copy(), states[:k + 1].copy(),
                                    residuals[:k + 1].copy(), betas[:k + 1].copy(),
                                    meta={"aborted_at": float(times[k + 1])})
                raise NonFiniteState(
                    f"state became non-finite at t={times[k + 1]:.6g}",
                    trajectory=prefix, time=float(times[k + 1]))
            states[k + 1] = x
            residuals[k + 1] = a_eff(x)
            betas[k + 1] = sched.beta_clamped(schedule, times[k + 1])

    meta = {"operator": op.kind, "schedule": schedule.family,
            "t_max": t_max, "n_steps": n_steps, "yosida_lambda": yosida_lambda}
    return Trajectory(times, states, residuals, betas, meta)


def series_solution_linear(matrix, gamma: float, x0, t: float,
                           tol: float = 1e-12) -> np.ndarray:
    """Power-series solution of the flow for a linear operator and the
    gamma/t anchor coefficient.

    Terms follow the ratio recurrence term_n = (-t / (n + gamma)) M term_{n-1},
    which keeps every partial product normalized (no overflow for moderate
    t ||M||); accumulation stops once the term-to-sum norm ratio stays below
    ``tol`` for 3 consecutive terms, guarding against accidentally small
    alternating terms.  gamma = 0 reduces to the matrix exponential series.
    """
    if not tol > 0:
        raise ConfigError(f"tolerance must be positive, got {tol}")
    if gamma < 0:
        raise ConfigError(f"gamma must be nonnegative, got {gamma}")
    if t < 0:
        raise ConfigError(f"time must be nonnegative, got {t}")
    m = np.asarray(matrix, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    if m.shape != (x0.size, x0.size):
        raise DimensionMismatch(f"matrix shape {m.shape} does not match x0 dim {x0.size}")
    term = x0.copy()
    total = x0.copy()
    peak = np.linalg.norm(term)
    consecutive_small = 0
    for n in range(1, _SERIES_MAX_TERMS + 1):
        term = (-t / (n + gamma)) * (m @ term)
        total += term
        peak = max(peak, np.linalg.norm(term))
        scale = np.linalg.norm(total)
        if np.linalg.norm(term) < tol * max(scale, np.finfo(float).tiny):
            consecutive_small += 1
            if consecutive_small == 3:
                # Alternating terms can peak far above the sum before they
                # decay; once cancellation has eaten the requested digits
                # the result is garbage even though the tail is small.
                if peak * np.finfo(float).eps > 10.0 * tol * max(scale, np.finfo(float).tiny):
                    raise NoConvergence(
                        f"series cancellation exceeds tol={tol:.1e} "
                        f"(term peak {peak:.2e}); use the integral form")
                return total
        else:
            consecutive_small = 0
    raise NoConvergence(
        f"series did not converge within {_SERIES_MAX_TERMS} terms "
        f"(t * ||M|| is likely too large; use the integral form)")


def _panel_edges(t: float, schedule: sched.AnchorSchedule, n_min: int,
                 matrix_norm: float) -> np.ndarray:
    """Panel edges on [0, t] for the flow integrand.

    Panels are geometrically refined toward s = 0 when beta is singular
    there (power laws with p < 1, or p = 1 with gamma < 1, where the
    leftover tail mass C(eps)/C(t) decays like a small power of eps), and
    capped in width by the oscillation scale 1/||M|| elsewhere.
    """
    singular_exp = None
    if schedule.family == sched.POWER_LAW:
        if schedule.p < 1.0:
            singular_exp = 1.0 - schedule.p
        elif abs(schedule.p - 1.0) < 1e-12 and schedule.gamma < 1.0:
            singular_exp = schedule.gamma
    if singular_exp is not None:
        # depth so the unresolved tail below t * 2^-depth carries < 1e-13
        depth = min(256, max(16, math.ceil(44.0 / singular_exp)))
    else:
        depth = 8
    width_cap = t if matrix_norm == 0.0 else min(t, 1.0 / matrix_norm)

    geo_top = min(t, width_cap)
    geo = geo_top * 2.0 ** -np.arange(depth - 1, -1, -1.0)
    uniform = np.array([])
    if geo_top < t:
        n_uniform = max(math.ceil((t - geo_top) / width_cap), n_min)
        uniform = np.linspace(geo_top, t, n_uniform + 1)[1:]
    edges = np.concatenate(([0.0], geo, uniform))
    return np.unique(edges)


def _node_exponentials(m: np.ndarray, taus: np.ndarray) -> np.ndarray:
    """e^{tau M} for every tau, via one eigendecomposition when it is
    well-conditioned and scaling-and-squaring otherwise."""
    lam, vecs = np.linalg.eig(m)
    cond = np.linalg.cond(vecs)
    if np.isfinite(cond) and cond < 1e6:
        inv = np.linalg.inv(vecs)
        phases = np.exp(taus[:, None] * lam[None, :])
        stack = np.einsum("jl,nl,lk->njk", vecs, phases, inv)
        return stack.real if np.isrealobj(m) else stack
    return scipy.linalg.expm(taus[:, None, None] * m[None, :, :])


def integral_solution_linear(matrix, schedule: sched.AnchorSchedule, x0, t: float,
                             quad_nodes: int = 512) -> np.ndarray:
    """Contraction-weighted integral solution of the flow for linear operators.

    The integrand is evaluated in the ratio form e^{(s-t)M} C(s)/C(t) beta(s),
    whose matrix-times-contraction factor never exceeds 1 for monotone M;
    exceeding 1 + 1e-8 aborts with QuadratureUnstable.  Quadrature is
    composite Gauss-Legendre; ``quad_nodes`` is a floor on the node budget,
    and panels are added as needed to resolve the e^{sM} oscillation scale
    and the s = 0 singularity of beta.
    """
    if schedule.family not in (sched.POWER_LAW, sched.STRONGLY_MONOTONE):
        raise ConfigError(
            f"integral form needs a power-law or strongly-monotone schedule, "
            f"got {schedule.family!r}")
    if quad_nodes < 64:
        raise ConfigError(f"need at least 64 quadrature nodes, got {quad_nodes}")
    if not t > 0:
        raise ConfigError(f"time must be positive, got {t}")
    m = np.asarray(matrix, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    if m.shape != (x0.size, x0.size):
        raise DimensionMismatch(f"matrix shape {m.shape} does not match x0 dim {x0.size}")

    m_norm = float(np.linalg.norm(m, 2))
    edges = _panel_edges(t, schedule, quad_nodes // _NODES_PER_PANEL, m_norm)
    xi, wi = np.polynomial.legendre.leggauss(_NODES_PER_PANEL)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    s_nodes = (mid[:, None] + half[:, None] * xi[None, :]).ravel()
    weights = (half[:, None] * wi[None, :]).ravel()

    log_c_t = sched.log_contraction(schedule, t)
    log_ratio = np.array([sched.log_contraction(schedule, s) for s in s_nodes]) - log_c_t
    betas = np.array([sched.beta_at(schedule, s) for s in s_nodes])
    ratios = np.exp(log_ratio)

    # ||e^{-u M}|| <= e^{-u min_eig(sym M)} for u >= 0, so the ratio bound is
    # checkable without per-node norms; the tiny negative slack admitted on
    # monotone matrices is clamped to zero to avoid false alarms.
    min_sym = float(np.linalg.eigvalsh(0.5 * (m + m.T)).min())
    if min_sym > -1e-9:
        min_sym = max(min_sym, 0.0)
    worst = np.max(np.exp(-(t - s_nodes) * min_sym + log_ratio))
    if worst > 1.0 + 1e-8:
        raise QuadratureUnstable(
            f"integrand ratio reached {worst:.12f} > 1; matrix is likely not monotone")

    exps = _node_exponentials(m, s_nodes - t)
    coeffs = weights * ratios * betas
    result = np.einsum("i,ijk,k->j", coeffs, exps, x0)

    c0 = sched.contraction_at_zero(schedule)
    if c0 > 0.0:
        result += c0 * math.exp(-log_c_t) * (scipy.linalg.expm(-t * m) @ x0)
    return result


def _adaptive_beta(a_val: np.ndarray, x: np.ndarray, x0: np.ndarray, t: float,
                   eps: float) -> float:
    resid_sq = float(a_val @ a_val)
    if resid_sq <= eps:
        return 0.0
    inner = float(a_val @ (x - x0))
    if inner >= -eps:
        raise DenominatorVanished(
            f"adaptive coefficient denominator vanished at t={t:.6g} "
            f"(<A(X), X - X0> = {inner:.3e} with |A(X)|^2 = {resid_sq:.3e})", time=t)
    return -resid_sq / (2.0 * inner)


def integrate_adaptive_ode(op: ops.OperatorSpec, x0, t_max: float,
                           n_steps: int) -> Trajectory:
    """RK4 for the flow whose coefficient beta is recomputed from each stage
    state so that |A(X)|^2 + 2 beta <A(X), X - x0> stays zero.

    Near t = 0 the coefficient behaves like 1/t; below ``ADAPTIVE_TIME_FLOOR``
    that limit replaces the state formula (at t = 0 exactly the right-hand
    side reduces to -A(x0)/2).
    """
    if n_steps < 10:
        raise ConfigError(f"need at least 10 steps, got {n_steps}")
    if op.lipschitz is None:
        raise ConfigError("adaptive flow needs a single-valued (Lipschitz) operator")
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (op.dim,):
        raise DimensionMismatch(f"x0 shape {x0.shape} does not match operator dim {op.dim}")
    a0 = ops.evaluate(op, x0)
    if float(a0 @ a0) <= sched.ZERO_RESIDUAL_SQ:
        raise ConfigError("adaptive flow requires A(x0) != 0")
    eps = sched.ZERO_RESIDUAL_SQ

    def rhs(t, x):
        a_val = ops.evaluate(op, x)
        if t <= 0.0:
            return -0.5 * a_val
        if t < ADAPTIVE_TIME_FLOOR:
            return -a_val - (x - x0) / t
        beta = _adaptive_beta(a_val, x, x0, t, eps)
        return -a_val - beta * (x - x0)

    dt = t_max / n_steps
    times = dt * np.arange(n_steps + 1)
    states = np.empty((n_steps + 1, op.dim))
    residuals = np.empty_like(states)
    betas = np.empty(n_steps + 1)

    x = x0.copy()
    states[0] = x
    residuals[0] = a0
    betas[0] = np.inf
    for k in range(n_steps):
        x = _rk4_step(rhs, times[k], x, dt)
        if not np.all(np.isfinite(x)):
            raise NonFiniteState(f"state became non-finite at t={times[k + 1]:.6g}",
                                 time=float(times[k + 1]))
        states[k + 1] = x
        a_val = ops.evaluate(op, x)
        residuals[k + 1] = a_val
        t_next = times[k + 1]
        if t_next < ADAPTIVE_TIME_FLOOR:
            betas[k + 1] = 1.0 / t_next
        else:
            betas[k + 1] = _adaptive_beta(a_val, x, x0, t_next, eps)

    meta = {"operator": op.kind, "schedule": "adaptive",
            "t_max": t_max, "n_steps": n_steps}
    return Trajectory(times, states, residuals, betas, meta)


def flow_nonexpansive_check(op: ops.OperatorSpec, schedule: sched.AnchorSchedule,
                            x0, y0, t_max: float, n_steps: int,
                            yosida_lambda: Optional[float] = None) -> bool:
    """Integrate two flows (each anchored at its own start) on a shared grid
    and check max_t |X(t) - Y(t)| <= |x0 - y0| up to integration slack."""
    x0 = np.asarray(x0, dtype=float)
    y0 = np.asarray(y0, dtype=float)
    if x0.shape != y0.shape:
        raise DimensionMismatch(f"shape mismatch: {x0.shape} vs {y0.shape}")
    a_eff = _effective_operator(op, yosida_lambda)
    anchors = np.stack([x0, y0])

    def rhs(t, pair):
        return -a_eff(pair) - sched.beta_clamped(schedule, t) * (pair - anchors)

    dt = t_max / n_steps
    pair = anchors.copy()
    gap0 = float(np.linalg.norm(x0 - y0))
    max_gap = gap0
    for k in range(n_steps):
        stiffness = sched.beta_clamped(schedule, k * dt) * dt
        pair = _rk4_span(rhs, k * dt, pair, dt, stiffness)
        max_gap = max(max_gap, float(np.linalg.norm(pair[0] - pair[1])))
    return max_gap <= gap0 * (1.0 + 1e-6) + 1e-9
